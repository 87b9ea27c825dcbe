pub mod chart;
pub mod domain;
pub mod expr;
pub mod geom;
pub mod mesh;
pub mod mugeo;
pub mod scene;
pub mod solver;
