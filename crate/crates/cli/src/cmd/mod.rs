pub mod flow;
pub mod gradcam;
pub mod loso;
pub mod manifest;
pub mod prima;
pub mod report;
