//! Hybrid forecasting: spectral season detection, Box-Cox, STL, tree
//! regressors for the season and ARIMA for the trend.

pub mod arima;
pub mod benchmark;
pub mod config;
pub mod decomposition;
pub mod pipeline;
pub mod recommender;
pub mod regressors;
pub mod series;
pub mod spectral;
pub mod synthetic;
