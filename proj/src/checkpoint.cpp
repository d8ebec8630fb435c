#include "gebd/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "gebd/error.hpp"
#include "gebd/fileutil.hpp"

namespace gebd {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

Tensor ParamSet::add(const std::string& name, Tensor t) {
    if (contains(name)) throw UsageError("duplicate parameter name: " + name);
    t.set_requires_grad(true);
    items_.emplace_back(name, t);
    return t;
}

const Tensor& ParamSet::get(const std::string& name) const {
    for (const auto& [n, t] : items_)
        if (n == name) return t;
    throw UsageError("unknown parameter: " + name);
}

bool ParamSet::contains(const std::string& name) const {
    return std::any_of(items_.begin(), items_.end(), [&](const auto& it) { return it.first == name; });
}

std::size_t ParamSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : items_) n += t.numel();
    return n;
}

void ParamSet::zero_grad() {
    for (auto& [_, t] : items_) t.zero_grad();
}

void ParamSet::load(const std::vector<NamedArray>& arrays) {
    for (auto& [name, t] : items_) {
        auto it = std::find_if(arrays.begin(), arrays.end(), [&](const auto& a) { return a.first == name; });
        if (it == arrays.end()) throw ConfigError("checkpoint is missing parameter " + name);
        if (it->second.shape() != t.shape()) {
            throw ConfigError("checkpoint parameter " + name + " has shape " + shape_str(it->second.shape()) +
                              ", model expects " + shape_str(t.shape()));
        }
        auto src = it->second.data();
        std::copy(src.begin(), src.end(), t.mutable_data().begin());
    }
}

namespace {

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::string& s) : s_(s) {}

    template <typename T>
    T get(const char* what) {
        need(sizeof(T), what);
        T v;
        std::memcpy(&v, s_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string bytes(std::size_t n, const char* what) {
        need(n, what);
        std::string v = s_.substr(pos_, n);
        pos_ += n;
        return v;
    }
    void need(std::size_t n, const char* what) const {
        if (s_.size() - pos_ < n) {
            throw ParseError(std::string("checkpoint truncated while reading ") + what + " at byte " +
                             std::to_string(pos_));
        }
    }
    bool done() const { return pos_ == s_.size(); }

private:
    const std::string& s_;
    std::size_t pos_ = 0;
};

} // namespace

std::string encode_checkpoint(const std::vector<NamedArray>& arrays) {
    std::string out(kCheckpointMagic, 4);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()));
    for (const auto& [name, t] : arrays) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) put<std::uint64_t>(out, d);
        const auto d = t.data();
        out.append(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(float));
    }
    return out;
}

std::vector<NamedArray> decode_checkpoint(const std::string& bytes) {
    Reader r(bytes);
    if (r.bytes(4, "magic") != std::string(kCheckpointMagic, 4)) throw ParseError("not a checkpoint: bad magic");
    const auto version = r.get<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
        throw ParseError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto count = r.get<std::uint32_t>("array count");
    std::vector<NamedArray> arrays;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = r.get<std::uint32_t>("name length");
        std::string name = r.bytes(len, "name");
        const auto rank = r.get<std::uint32_t>("rank");
        if (rank > 8) throw ParseError("array " + name + " has implausible rank " + std::to_string(rank));
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>("dims"));
        const std::size_t n = shape_numel(shape);
        r.need(n * sizeof(float), "array data");
        std::string raw = r.bytes(n * sizeof(float), "array data");
        std::vector<float> values(n);
        std::memcpy(values.data(), raw.data(), raw.size());
        arrays.emplace_back(std::move(name), Tensor::from(std::move(shape), std::move(values)));
    }
    if (!r.done()) throw ParseError("trailing bytes after checkpoint arrays");
    return arrays;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
    write_file_atomic(path, encode_checkpoint(arrays));
}

std::vector<NamedArray> load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(read_file(path));
}

} // namespace gebd
