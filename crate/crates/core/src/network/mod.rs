//! Agent graphs and the Bernoulli asynchronous network model.

mod model;
mod topology;

pub use model::{
    nominal_weights, BernoulliAsyncModel, CombinationRealization, Link, NominalWeights, SparseCombination,
};
pub use topology::{Topology, TopologySpec};
