//! Evaluation metrics for heatmaps, scanpaths and ratings.

pub mod heatmap;
pub mod rating;
pub mod scanpath;

pub use heatmap::{
    auc_judd, cc, evaluate_heatmap, fixations_to_map, kld, nss, r_squared, resize_bilinear, rmse, sauc, sim,
    HeatmapEvalInput, HeatmapScores,
};
pub use rating::{plcc, srcc, PairedScores};
pub use scanpath::{
    evaluate_scanpath, levenshtein, meanshift_clusters, multimatch, nw_similarity, semfed, semss, sequence_score,
    Clusters, MultiMatchScores, ScanpathEvalInput, ScanpathScores, SegmentationMap,
};
