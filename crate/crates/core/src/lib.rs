pub mod api;
pub mod attributes;
pub mod backend;
pub mod config;
pub mod latent;
pub mod mask;
pub mod pipeline;
pub mod raster;
pub mod scene;
pub mod session;
pub mod store;
pub mod transfer;
