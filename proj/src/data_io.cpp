#include "gebd/data_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <random>
#include <set>

#include <json.hpp>

#include "gebd/error.hpp"
#include "gebd/fileutil.hpp"
#include "gebd/init.hpp"

namespace gebd {

using nlohmann::json;

void FeatureFile::validate() const {
    if (!(fps > 0.0f)) throw InputError("video " + video_id + ": fps must be positive");
    if (frames == 0 || channels == 0) throw InputError("video " + video_id + ": empty feature matrix");
    if (values.size() != frames * channels) {
        throw InputError("video " + video_id + ": expected " + std::to_string(frames * channels) +
                         " feature values, found " + std::to_string(values.size()));
    }
}

Tensor FeatureFile::tensor() const { return Tensor::from({frames, channels}, values); }

std::vector<double> FeatureFile::timestamps() const {
    std::vector<double> t(frames);
    for (std::size_t i = 0; i < frames; ++i) t[i] = static_cast<double>(i) / fps;
    return t;
}

std::vector<std::size_t> uniform_indices(std::size_t source_length, std::size_t target) {
    if (source_length == 0) throw InputError("cannot sample from an empty sequence");
    if (target == 0) throw ConfigError("sample target must be >= 1");
    std::vector<std::size_t> idx(target, 0);
    if (target == 1) return idx;
    for (std::size_t i = 0; i < target; ++i) {
        const double pos = static_cast<double>(i) * static_cast<double>(source_length - 1) /
                           static_cast<double>(target - 1);
        idx[i] = static_cast<std::size_t>(std::llround(pos));
    }
    return idx;
}

FeatureSequence sample_uniform(const FeatureFile& file, std::size_t target) {
    file.validate();
    const auto idx = uniform_indices(file.frames, target);
    const auto times = file.timestamps();
    std::vector<float> values(target * file.channels);
    FeatureSequence seq;
    seq.video_id = file.video_id;
    seq.duration = file.duration();
    for (std::size_t i = 0; i < target; ++i) {
        std::copy_n(file.values.data() + idx[i] * file.channels, file.channels, values.data() + i * file.channels);
        seq.timestamps.push_back(times[idx[i]]);
    }
    seq.features = Tensor::from({target, file.channels}, std::move(values));
    return seq;
}

FeatureSequence full_sequence(const FeatureFile& file) {
    file.validate();
    return {file.video_id, file.tensor(), file.timestamps(), file.duration()};
}

namespace {

static_assert(std::endian::native == std::endian::little, "binary I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& s, std::size_t& pos, const char* field) {
    if (s.size() - pos < sizeof(T)) {
        throw ParseError(std::string("feature file truncated in field '") + field + "' at byte " + std::to_string(pos));
    }
    T v;
    std::memcpy(&v, s.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

} // namespace

std::string encode_features(const FeatureFile& file) {
    file.validate();
    std::string out(kFeatureMagic, 4);
    put<std::uint32_t>(out, kFeatureVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(file.video_id.size()));
    out += file.video_id;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(file.frames));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(file.channels));
    put<float>(out, file.fps);
    out.append(reinterpret_cast<const char*>(file.values.data()), file.values.size() * sizeof(float));
    return out;
}

FeatureFile decode_features(const std::string& bytes) {
    if (bytes.size() < 4 || bytes.compare(0, 4, kFeatureMagic, 4) != 0) {
        throw ParseError("not a feature file: bad magic");
    }
    std::size_t pos = 4;
    const auto version = take<std::uint32_t>(bytes, pos, "version");
    if (version != kFeatureVersion) throw ParseError("unsupported feature file version " + std::to_string(version));
    const auto id_len = take<std::uint32_t>(bytes, pos, "id length");
    if (bytes.size() - pos < id_len) throw ParseError("feature file truncated in field 'video id'");
    FeatureFile f;
    f.video_id = bytes.substr(pos, id_len);
    pos += id_len;
    f.frames = take<std::uint32_t>(bytes, pos, "T");
    f.channels = take<std::uint32_t>(bytes, pos, "C");
    f.fps = take<float>(bytes, pos, "fps");
    const std::size_t expected = f.frames * f.channels * sizeof(float);
    if (bytes.size() - pos != expected) {
        throw ParseError("feature payload size mismatch for video " + f.video_id + ": header T=" +
                         std::to_string(f.frames) + " C=" + std::to_string(f.channels) + " needs " +
                         std::to_string(expected) + " bytes, found " + std::to_string(bytes.size() - pos));
    }
    f.values.resize(f.frames * f.channels);
    std::memcpy(f.values.data(), bytes.data() + pos, expected);
    try {
        f.validate();
    } catch (const InputError& e) {
        throw ParseError(e.what());
    }
    return f;
}

void write_features(const std::filesystem::path& path, const FeatureFile& file) {
    write_file_atomic(path, encode_features(file));
}

FeatureFile read_features(const std::filesystem::path& path) {
    try {
        return decode_features(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

namespace {

json parse_json(const std::string& text, const std::string& source) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(source + ": " + e.what());
    }
}

template <typename T>
T field(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ParseError(where + "." + key + ": wrong type");
    }
}

} // namespace

std::string encode_annotations(const AnnotationSet& annotations) {
    json videos = json::object();
    for (const auto& [id, a] : annotations) {
        json raters = json::array();
        for (const auto& r : a.raters) raters.push_back({{"id", r.rater_id}, {"boundaries", r.boundaries}});
        videos[id] = {{"duration", a.duration}, {"raters", raters}};
    }
    return json{{"videos", videos}}.dump(1) + "\n";
}

AnnotationSet decode_annotations(const std::string& text, const std::string& source) {
    const json doc = parse_json(text, source);
    if (!doc.is_object() || !doc.contains("videos") || !doc["videos"].is_object()) {
        throw ParseError(source + ": expected an object with a 'videos' map");
    }
    AnnotationSet out;
    for (const auto& [id, v] : doc["videos"].items()) {
        const std::string where = source + ": videos." + id;
        BoundaryAnnotation a;
        a.video_id = id;
        a.duration = field<double>(v, "duration", where);
        const json raters = field<json>(v, "raters", where);
        if (!raters.is_array()) throw ParseError(where + ".raters: expected an array");
        for (std::size_t i = 0; i < raters.size(); ++i) {
            const std::string rw = where + ".raters[" + std::to_string(i) + "]";
            RaterAnnotation r;
            r.rater_id = field<std::string>(raters[i], "id", rw);
            r.boundaries = field<std::vector<double>>(raters[i], "boundaries", rw);
            a.raters.push_back(std::move(r));
        }
        try {
            a.validate();
        } catch (const InputError& e) {
            throw ParseError(source + ": " + e.what());
        }
        out.emplace(id, std::move(a));
    }
    return out;
}

void write_annotations(const std::filesystem::path& path, const AnnotationSet& annotations) {
    write_file_atomic(path, encode_annotations(annotations));
}

AnnotationSet read_annotations(const std::filesystem::path& path) {
    return decode_annotations(read_file(path), path.string());
}

std::string encode_predictions(const std::vector<VideoPrediction>& predictions) {
    json videos = json::object();
    for (const auto& p : predictions) {
        json v = {{"boundaries", p.boundaries}};
        if (!p.scores.empty()) v["scores"] = p.scores;
        videos[p.video_id] = v;
    }
    return json{{"videos", videos}}.dump(1) + "\n";
}

std::vector<VideoPrediction> decode_predictions(const std::string& text, const std::string& source) {
    const json doc = parse_json(text, source);
    if (!doc.is_object() || !doc.contains("videos") || !doc["videos"].is_object()) {
        throw ParseError(source + ": expected an object with a 'videos' map");
    }
    std::vector<VideoPrediction> out;
    for (const auto& [id, v] : doc["videos"].items()) {
        const std::string where = source + ": videos." + id;
        VideoPrediction p;
        p.video_id = id;
        p.boundaries = field<std::vector<double>>(v, "boundaries", where);
        if (v.contains("scores")) p.scores = field<std::vector<float>>(v, "scores", where);
        std::sort(p.boundaries.begin(), p.boundaries.end());
        out.push_back(std::move(p));
    }
    return out;
}

void write_predictions(const std::filesystem::path& path, const std::vector<VideoPrediction>& predictions) {
    write_file_atomic(path, encode_predictions(predictions));
}

std::vector<VideoPrediction> read_predictions(const std::filesystem::path& path) {
    return decode_predictions(read_file(path), path.string());
}

void SyntheticSpec::validate() const {
    if (min_segments < 1 || max_segments < min_segments) {
        throw ConfigError("segment range [" + std::to_string(min_segments) + ", " + std::to_string(max_segments) +
                          "] is invalid");
    }
    if (frames == 0 || channels == 0 || latent_dim == 0) throw ConfigError("frames, channels and latent_dim must be >= 1");
    if (min_segment_length == 0) throw ConfigError("min_segment_length must be >= 1");
    if (max_segments * min_segment_length > frames) {
        throw ConfigError(std::to_string(max_segments) + " segments of at least " + std::to_string(min_segment_length) +
                          " frames do not fit in T=" + std::to_string(frames));
    }
    if (!(noise >= 0.0f) || !(jitter >= 0.0f) || !(latent_scale > 0.0f)) {
        throw ConfigError("noise and jitter must be >= 0, latent_scale > 0");
    }
    if (!(fps > 0.0f)) throw ConfigError("fps must be positive");
    if (raters == 0) throw ConfigError("at least one rater is required");
}

SyntheticVideo generate_synthetic(const SyntheticSpec& spec, const std::string& video_id) {
    spec.validate();
    Rng rng(spec.seed);
    std::normal_distribution<float> gauss(0.0f, 1.0f);
    std::uniform_int_distribution<std::size_t> seg_dist(spec.min_segments, spec.max_segments);
    const std::size_t segments = seg_dist(rng);

    // Segment lengths: the minimum plus a uniform random composition of the slack.
    const std::size_t slack = spec.frames - segments * spec.min_segment_length;
    std::uniform_int_distribution<std::size_t> cut_dist(0, slack);
    std::vector<std::size_t> cuts(segments - 1);
    for (auto& c : cuts) c = cut_dist(rng);
    std::sort(cuts.begin(), cuts.end());
    SyntheticVideo v;
    std::size_t prev_cut = 0, start = 0;
    std::vector<std::size_t> seg_start{0};
    for (std::size_t i = 0; i + 1 < segments; ++i) {
        start += spec.min_segment_length + (cuts[i] - prev_cut);
        prev_cut = cuts[i];
        seg_start.push_back(start);
        v.change_frames.push_back(start);
    }

    Tensor projection = Tensor::zeros({spec.channels, spec.latent_dim});
    const float pscale = 1.0f / std::sqrt(static_cast<float>(spec.latent_dim));
    for (auto& p : projection.mutable_data()) p = gauss(rng) * pscale;
    const auto proj = projection.data();

    v.features.video_id = video_id;
    v.features.frames = spec.frames;
    v.features.channels = spec.channels;
    v.features.fps = spec.fps;
    v.features.values.assign(spec.frames * spec.channels, 0.0f);
    std::vector<float> latent(spec.latent_dim), mean(spec.channels);
    for (std::size_t s = 0; s < segments; ++s) {
        for (auto& z : latent) z = gauss(rng) * spec.latent_scale;
        for (std::size_t c = 0; c < spec.channels; ++c) {
            float acc = 0.0f;
            for (std::size_t d = 0; d < spec.latent_dim; ++d) acc += proj[c * spec.latent_dim + d] * latent[d];
            mean[c] = acc;
        }
        const std::size_t end = s + 1 < segments ? seg_start[s + 1] : spec.frames;
        for (std::size_t t = seg_start[s]; t < end; ++t) {
            for (std::size_t c = 0; c < spec.channels; ++c) {
                v.features.values[t * spec.channels + c] = mean[c] + (spec.noise > 0.0f ? spec.noise * gauss(rng) : 0.0f);
            }
        }
    }

    v.annotation.video_id = video_id;
    v.annotation.duration = v.features.duration();
    for (std::size_t r = 0; r < spec.raters; ++r) {
        std::set<long> frames;
        for (auto cf : v.change_frames) {
            long f = static_cast<long>(cf);
            if (spec.jitter > 0.0f) f += std::lround(spec.jitter * gauss(rng));
            frames.insert(std::clamp(f, 0L, static_cast<long>(spec.frames) - 1));
        }
        RaterAnnotation ra;
        ra.rater_id = "rater" + std::to_string(r);
        for (long f : frames) ra.boundaries.push_back(static_cast<double>(f) / spec.fps);
        v.annotation.raters.push_back(std::move(ra));
    }
    return v;
}

std::vector<SyntheticVideo> generate_dataset(const SyntheticSpec& spec, std::size_t count, const std::string& id_prefix) {
    std::vector<SyntheticVideo> out;
    out.reserve(count);
    std::seed_seq seq{spec.seed};
    std::vector<std::uint32_t> seeds(2 * count);
    seq.generate(seeds.begin(), seeds.end());
    for (std::size_t i = 0; i < count; ++i) {
        SyntheticSpec s = spec;
        s.seed = (static_cast<std::uint64_t>(seeds[2 * i]) << 32) | seeds[2 * i + 1];
        char id[32];
        std::snprintf(id, sizeof id, "%s%05zu", id_prefix.c_str(), i);
        out.push_back(generate_synthetic(s, id));
    }
    return out;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<SyntheticVideo>& videos) {
    AnnotationSet annotations;
    for (const auto& v : videos) {
        write_features(dir / "features" / (v.features.video_id + ".scxf"), v.features);
        annotations.emplace(v.annotation.video_id, v.annotation);
    }
    write_annotations(dir / "annotations.json", annotations);
}

std::vector<DatasetEntry> read_dataset(const std::filesystem::path& dir) {
    const AnnotationSet annotations = read_annotations(dir / "annotations.json");
    std::vector<DatasetEntry> out;
    for (const auto& [id, a] : annotations) {
        const auto path = dir / "features" / (id + ".scxf");
        if (!std::filesystem::exists(path)) throw InputError("dataset " + dir.string() + ": missing " + path.string());
        DatasetEntry e{read_features(path), a};
        if (e.features.video_id != id) {
            throw ParseError(path.string() + ": video id '" + e.features.video_id + "' does not match file name");
        }
        out.push_back(std::move(e));
    }
    if (out.empty()) throw InputError("dataset " + dir.string() + " contains no videos");
    return out;
}

std::vector<std::size_t> boundary_frames(const BoundaryAnnotation& annotation, std::span<const double> frame_times) {
    std::set<std::size_t> frames;
    if (frame_times.empty()) return {};
    for (const auto& r : annotation.raters) {
        for (double t : r.boundaries) {
            auto it = std::lower_bound(frame_times.begin(), frame_times.end(), t);
            std::size_t idx = static_cast<std::size_t>(it - frame_times.begin());
            if (idx == frame_times.size()) --idx;
            else if (idx > 0 && t - frame_times[idx - 1] <= frame_times[idx] - t) --idx;
            frames.insert(idx);
        }
    }
    return {frames.begin(), frames.end()};
}

} // namespace gebd
