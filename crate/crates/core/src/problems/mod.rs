//! Catalog of benchmark problems.

mod aic;
mod literature;
mod norm_chain;
mod toll;

pub use aic::{generate_trajectory, make_aic, obstacle_margins, AicScenario, PolicyKind, PolicySpec};
pub use literature::{make_shared_dof_toy, make_sinha, make_tilahun};
pub use norm_chain::make_norm_chain;
pub use toll::{make_nested_toll, make_nested_toll_bounded, TollScenario};

pub(crate) fn names(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}
