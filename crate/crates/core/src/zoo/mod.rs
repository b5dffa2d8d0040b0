//! Concrete games.

pub mod congregation;
pub mod coordination;
pub mod random;
pub mod sis;
pub mod tabular;

pub use congregation::{CongregationGame, CongregationParams};
pub use coordination::{coordination_game, CoordinationParams};
pub use random::{random_game, RandomGame, RandomGameParams};
pub use sis::{SisGame, SisParams};
pub use tabular::TabularGame;
