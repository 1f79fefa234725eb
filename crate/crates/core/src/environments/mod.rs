//! Concrete task families: mazes, grid worlds, cart-pole, and small table
//! MDPs for checks.

pub mod cartpole;
pub mod grid;
pub mod gridworld;
pub mod table;

pub use cartpole::{make_cartpole_env, CartPoleEnv, CartPoleError, CartPoleParams, DiscretizerSpec};
pub use grid::{bfs_distance, move_start, parse_grid_layout, shrink_maze, Cell, GridLayout, LayoutError, Region};
pub use gridworld::{make_gridworld_env, make_maze_env, GridEnv, StartRule};
pub use table::{ConstantRewardEnv, TableEnv};
