pub mod autoarpd;
pub mod delay_model;
pub mod inflation;
pub mod link_layer;
pub mod nft;
pub mod orchestrator;
pub mod preflight;
pub mod rational;
pub mod script;
pub mod tc;
pub mod topology;
