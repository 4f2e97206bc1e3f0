//! Reverse-mode autodiff, the heterogeneous graph transformer encoder and
//! its contrastive training loop.

mod checkpoint;
mod encoder;
mod forward;
mod gradcheck;
pub mod gradsuite;
mod loss;
mod optim;
mod params;
mod tape;
mod tensor;
mod train;

pub use checkpoint::MODEL_MAGIC;
pub use encoder::StructuralEncoder;
pub use forward::{hgt_forward, node_features, Encoded, LayerAttention, MessageGraph};
pub use gradcheck::{grad_check, TapeFn, GRAD_CHECK_FLOOR};
pub use loss::{infonce_from_similarities, infonce_loss, infonce_on_tape};
pub use optim::Adam;
pub use params::{message_relations, HgtConfig, HgtParams, MessageRelation, Proj};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
pub use train::{loss_history_csv, train_cvcl, train_cvcl_with, CvclConfig};
