pub mod geom;
pub mod grid;
pub mod evalmap;
pub mod harvester;
pub mod learn;
pub mod pipeline;
pub mod seeds;
pub mod stands;
pub mod synthgen;
