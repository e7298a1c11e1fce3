// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "kbitq/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kbitq {

/// One tensor record from a safetensors header. Offsets are relative to the
/// data region that follows the JSON header.
struct ContainerEntry {
    std::string name;
    std::string dtype;
    Shape shape;
    std::uint64_t begin = 0;
    std::uint64_t end = 0;

    /// F32, F16 and BF16 convert to float; other dtypes are listed but not loadable.
    [[nodiscard]] bool is_float() const { return dtype == "F32" || dtype == "F16" || dtype == "BF16"; }
};

/// Read-only view of a safetensors file: 8-byte little-endian header length,
/// JSON header, raw data. Tensor data is read on demand, so one container can
/// serve concurrent readers.
class TensorContainer {
public:
    static TensorContainer open(const std::filesystem::path& path);

    /// Entries in data-offset order.
    [[nodiscard]] const std::vector<ContainerEntry>& entries() const noexcept { return entries_; }
    [[nodiscard]] const ContainerEntry* find(std::string_view name) const;
    [[nodiscard]] const std::map<std::string, std::string>& metadata() const noexcept { return metadata_; }
    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

    /// Loads a float tensor, converted to float32.
    [[nodiscard]] Tensor read(std::string_view name) const;

private:
    std::filesystem::path path_;
    std::uint64_t data_start_ = 0;
    std::vector<ContainerEntry> entries_;
    std::map<std::string, std::string> metadata_;
};

enum class StorageDtype { F32, F16 };

void write_container(const std::filesystem::path& path, std::span<const NamedTensor> tensors,
                     StorageDtype dtype = StorageDtype::F32, const std::map<std::string, std::string>& metadata = {});

}  // namespace kbitq
