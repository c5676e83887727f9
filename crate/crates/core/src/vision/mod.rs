//! Camera-side perception: ground-plane perspective, HOG + linear SVM
//! verification and hue-based colour classification.

mod color;
mod hog;
mod patch;
mod perspective;
mod svm;

pub use color::{
    circular_mean, classify_color, classify_color_with, hue_distance, kmeans_hue, ColorConfig, ConeColor, HueClusters,
    KMEANS_MAX_ITER,
};
pub use hog::{hog_features, hog_features_with, HogConfig, HogDescriptor};
pub use patch::{
    hsv_to_rgb, luma, parse_patch, patch_to_string, read_patch, rgb_to_hsv, write_patch, Hsv, ImagePatch, Pixels,
    PATCH_HEADER,
};
pub use perspective::{project, solve_perspective, PerspectiveMatrix};
pub use svm::{
    model_to_string, parse_model, read_model, svm_predict, svm_train, write_model, LinearSvmModel, SvmTrainConfig,
    TrainingReport, MODEL_HEADER,
};
