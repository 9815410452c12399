#pragma once

#include <optional>
#include <string>

#include "taskvid/net.hpp"

namespace taskvid {

// One-file checkpoint: 8-byte magic, u64 header length, JSON header (config,
// tensor directory with name/dtype/shape/offset), raw little-endian float32
// payloads, trailing CRC32 over header+payload. Base checkpoints hold the
// model; adapter checkpoints hold only LoRA tensors plus guards binding them
// to their base.
struct Checkpoint {
    enum class Kind { Base, Adapter };

    Kind kind = Kind::Base;
    ModelConfig config;
    double beta_start = 1e-4, beta_end = 0.035;

    DenoiserParams base;   // Kind::Base
    LoraAdapter adapter;   // Kind::Adapter

    AdamWState opt;        // optimizer moments, resumable
    int64_t step = 0;
    uint64_t seed = 0;
    uint64_t base_params_hash = 0;  // adapter: hash of the frozen base it was tuned on

    NoiseSchedule schedule() const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Adapter/base pairing guard; throws ValidationError when configs differ.
void verify_adapter_matches(const Checkpoint& base, const Checkpoint& adapter);

uint32_t crc32_bytes(const void* data, size_t n, uint32_t seed = 0);

}  // namespace taskvid
