//! Tree-based tensor formats: minimal subspaces, fixed tree-based rank sets,
//! their charts and tangent spaces, on dense desk-scale tensors.

pub mod charts;
pub mod error;
pub mod format;
pub mod linalg;
pub mod network;
pub mod subspace;
pub mod tangent;
pub mod tensor;
pub mod tree;

pub use charts::{
    assemble_delta, decompose_delta, exp_operator, ft_chart, ft_chart_inverse, ft_chart_point, split,
    tucker_chart_inverse, tucker_chart_point, ChartData, LaplacianLike, SplitSpace, Splits,
};
pub use error::{Error, Result};
pub use format::{
    bounded_rank_member, generate_tree_tensor, is_admissible, is_member, is_proper, necessary_conditions,
    random_tree_tensor, tucker_membership, AdmissibilityVerdict, MembershipReport, ProperVerdict, Verdict,
};
pub use linalg::Matrix;
pub use network::TreeNetwork;
pub use subspace::{check_chain, minimal_subspace, tree_rank, SubspaceBasis, TreeRank, DEFAULT_TOL};
pub use tangent::{tangent_dimension, tangent_dimension_oracle, OperatorSpaceBasis, TangentReport};
pub use tensor::{matricize, DenseTensor, ModeSubset};
pub use tree::{DimensionTree, Partition};
