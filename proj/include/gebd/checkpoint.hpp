#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gebd/tensor.hpp"

namespace gebd {

inline constexpr char kCheckpointMagic[4] = {'S', 'C', 'X', 'W'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedArray = std::pair<std::string, Tensor>;

/// Ordered registry of named trainable tensors.
class ParamSet {
public:
    /// Registers `t` as a trainable leaf; names must be unique.
    Tensor add(const std::string& name, Tensor t);
    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const;

    const std::vector<NamedArray>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }
    std::size_t scalar_count() const;
    void zero_grad();

    /// Overwrites values from `arrays`; every registered name must be present
    /// with a matching shape.
    void load(const std::vector<NamedArray>& arrays);

private:
    std::vector<NamedArray> items_;
};

// Layout (little-endian): magic "SCXW", u32 version, u32 array count, then per
// array: u32 name length, UTF-8 name, u32 rank, u64 dims[rank], f32 data.
std::string encode_checkpoint(const std::vector<NamedArray>& arrays);
std::vector<NamedArray> decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> load_checkpoint(const std::filesystem::path& path);

} // namespace gebd
