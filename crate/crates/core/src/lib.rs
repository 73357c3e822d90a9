//! Toolkit for sketch-and-extrude CAD command sequences: parsing and
//! tokenization of the sequence language, execution into watertight triangle
//! meshes, reconstruction and topology quality metrics, and the dataset
//! construction pipeline built on top of them.

pub mod cmdseq;
pub mod data_pipeline;
pub mod sketch2d;
pub mod mesh_metrics;
pub mod recon_metrics;
pub mod solid_kernel;
pub mod geom;
