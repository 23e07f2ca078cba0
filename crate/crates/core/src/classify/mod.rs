//! Classifiers: one-vs-one SVM, Labeled LDA, and the topic-augmented hybrid.

pub mod grid;
pub mod hybrid;
pub mod llda;
pub mod svm;

pub use grid::{build_grid, grid_search, stratified_folds, GridCell, GridResult};
pub use hybrid::{append_mixtures, hybrid_featurize, topic_mixtures};
pub use llda::{llda_train, LldaParams, LldaTrainer, TopicMixture, TopicModel};
pub use svm::{train_binary, BinaryMachine, Kernel, SvmModel, SvmParams};
