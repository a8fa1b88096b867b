//! Teacher/student training with meta pseudo labels: the student learns
//! from the teacher's hard pseudo-labels, while the teacher combines a
//! supervised loss, a consistency loss on mixed unlabeled images and a
//! feedback term measuring how much its pseudo-labels helped the student.

mod config;
mod losses;
mod train;

pub use config::{parse_parts, FeedbackMode, ScalingMode, TrainConfig};
pub use losses::{
    batch_ce, batch_ce_value, consistency_loss_on, consistency_targets, feedback_grad, post_update_labeled_loss,
    student_step, teacher_supervised_loss, uda_consistency_loss, Feedback, LabeledBatch, PseudoBatch,
};
pub use train::{
    mean_dice, train, train_to_dir, train_with_log, LogRecord, LossBreakdown, RunArtifacts, TrainOutput, CONFIG_FILE,
    STUDENT_CHECKPOINT, TEACHER_CHECKPOINT, TRAIN_LOG,
};
