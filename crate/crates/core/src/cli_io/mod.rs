//! Device ingestion, campaign orchestration and result files.

pub mod campaign;
pub mod device;

pub use campaign::{
    linear_fit_r2, run_campaign, verify_coefficients, write_atomic, CampaignOptions, CampaignReport,
    CampaignRow, VerificationRow, VerificationTable,
};
pub use device::{synthetic_device, Device, DeviceFile, UnitCell};
