//! The two black-box regressors used inside the driver loop: ordinary least
//! squares on the order statistics, and k-nearest-neighbor regression with
//! leave-one-out selection of k.

pub mod knn;
pub mod ols;

pub use knn::{
    knn_index, knn_predict_in_sample, knn_select_k, IndexStrategy, KSelection, NeighborIndex,
    DEFAULT_DIM_THRESHOLD,
};
pub use ols::{ols_fit, ols_predict, LinearFit, OlsRegressor};
