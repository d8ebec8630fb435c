#pragma once

// Feature/annotation/prediction files, uniform frame sampling and the
// planted-boundary synthetic generator.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gebd/eval.hpp"
#include "gebd/tensor.hpp"

namespace gebd {

inline constexpr char kFeatureMagic[4] = {'S', 'C', 'X', 'F'};
inline constexpr std::uint32_t kFeatureVersion = 1;

/// Raw per-frame features of one video.
struct FeatureFile {
    std::string video_id;
    std::size_t frames = 0;
    std::size_t channels = 0;
    float fps = 25.0f;
    std::vector<float> values;  // row-major [frames, channels]

    void validate() const;
    Tensor tensor() const;
    /// Frame f is at f / fps seconds.
    std::vector<double> timestamps() const;
    double duration() const { return static_cast<double>(frames) / fps; }

    bool operator==(const FeatureFile&) const = default;
};

/// Model input: [T, C] features plus the timestamp of each row.
struct FeatureSequence {
    std::string video_id;
    Tensor features;
    std::vector<double> timestamps;
    double duration = 0.0;

    std::size_t length() const { return features.dim(0); }
};

/// Picks rows round(i * (len - 1) / (T - 1)), i = 0..T-1.
std::vector<std::size_t> uniform_indices(std::size_t source_length, std::size_t target);
FeatureSequence sample_uniform(const FeatureFile& file, std::size_t target = 100);
/// Uses all frames as-is.
FeatureSequence full_sequence(const FeatureFile& file);

// Binary layout (little-endian): "SCXF", u32 version, u32 id length, id bytes,
// u32 T, u32 C, f32 fps, then T*C f32 values.
std::string encode_features(const FeatureFile& file);
FeatureFile decode_features(const std::string& bytes);
void write_features(const std::filesystem::path& path, const FeatureFile& file);
FeatureFile read_features(const std::filesystem::path& path);

using AnnotationSet = std::map<std::string, BoundaryAnnotation>;

std::string encode_annotations(const AnnotationSet& annotations);
AnnotationSet decode_annotations(const std::string& json, const std::string& source = "annotations");
void write_annotations(const std::filesystem::path& path, const AnnotationSet& annotations);
AnnotationSet read_annotations(const std::filesystem::path& path);

std::string encode_predictions(const std::vector<VideoPrediction>& predictions);
std::vector<VideoPrediction> decode_predictions(const std::string& json, const std::string& source = "predictions");
void write_predictions(const std::filesystem::path& path, const std::vector<VideoPrediction>& predictions);
std::vector<VideoPrediction> read_predictions(const std::filesystem::path& path);

struct SyntheticSpec {
    std::uint64_t seed = 0;
    std::size_t min_segments = 3;
    std::size_t max_segments = 6;
    std::size_t latent_dim = 8;
    float latent_scale = 1.0f;
    float noise = 0.3f;
    std::size_t frames = 100;
    std::size_t channels = 32;
    float jitter = 1.0f;  // rater jitter std-dev, frames
    float fps = 25.0f;
    std::size_t min_segment_length = 5;
    std::size_t raters = 3;

    void validate() const;
    double expected_boundaries() const {
        return 0.5 * static_cast<double>(min_segments + max_segments) - 1.0;
    }
};

struct SyntheticVideo {
    FeatureFile features;
    BoundaryAnnotation annotation;
    std::vector<std::size_t> change_frames;  // first frame of each new segment
};

SyntheticVideo generate_synthetic(const SyntheticSpec& spec, const std::string& video_id = "synthetic");

/// `count` videos with per-video seeds derived from spec.seed.
std::vector<SyntheticVideo> generate_dataset(const SyntheticSpec& spec, std::size_t count,
                                             const std::string& id_prefix = "syn");

/// Layout: <dir>/annotations.json and <dir>/features/<video_id>.scxf.
void write_dataset(const std::filesystem::path& dir, const std::vector<SyntheticVideo>& videos);

struct DatasetEntry {
    FeatureFile features;
    BoundaryAnnotation annotation;
};
std::vector<DatasetEntry> read_dataset(const std::filesystem::path& dir);

/// Frame indices of every rater's boundaries (union, deduplicated).
std::vector<std::size_t> boundary_frames(const BoundaryAnnotation& annotation, std::span<const double> frame_times);

} // namespace gebd
