#include "taskvid/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "taskvid/errors.hpp"
#include "taskvid/schedule.hpp"

namespace taskvid {

namespace {

constexpr char kMagic[8] = {'T', 'V', 'C', 'K', 'P', 'T', '0', '1'};

std::array<uint32_t, 256> make_crc_table() {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
        uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        t[i] = c;
    }
    return t;
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint64_t get_u64(const char* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

void append_f32_le(std::string& out, const float* data, int64_t n) {
    for (int64_t i = 0; i < n; ++i) {
        uint32_t u;
        std::memcpy(&u, &data[i], 4);
        out.push_back(static_cast<char>(u & 0xff));
        out.push_back(static_cast<char>((u >> 8) & 0xff));
        out.push_back(static_cast<char>((u >> 16) & 0xff));
        out.push_back(static_cast<char>((u >> 24) & 0xff));
    }
}

void read_f32_le(const char* p, float* data, int64_t n) {
    for (int64_t i = 0; i < n; ++i) {
        uint32_t u = static_cast<uint32_t>(static_cast<unsigned char>(p[4 * i])) |
                     static_cast<uint32_t>(static_cast<unsigned char>(p[4 * i + 1])) << 8 |
                     static_cast<uint32_t>(static_cast<unsigned char>(p[4 * i + 2])) << 16 |
                     static_cast<uint32_t>(static_cast<unsigned char>(p[4 * i + 3])) << 24;
        std::memcpy(&data[i], &u, 4);
    }
}

}  // namespace

uint32_t crc32_bytes(const void* data, size_t n, uint32_t seed) {
    static const auto table = make_crc_table();
    uint32_t c = seed ^ 0xFFFFFFFFu;
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) c = table[(c ^ p[i]) & 0xff] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

NoiseSchedule Checkpoint::schedule() const { return make_schedule(config.tsteps, beta_start, beta_end); }

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    // gather named tensors in serialization order
    std::vector<std::pair<std::string, const TensorF*>> entries;
    if (ckpt.kind == Checkpoint::Kind::Base) {
        for (const auto& [name, t] : ckpt.base.tensors) entries.emplace_back(name, &t);
    } else {
        for (const auto& [name, ab] : ckpt.adapter.layers) {
            entries.emplace_back("lora." + name + ".A", &ab.first);
            entries.emplace_back("lora." + name + ".B", &ab.second);
        }
    }
    for (const auto& [name, t] : ckpt.opt.m) entries.emplace_back("opt.m." + name, &t);
    for (const auto& [name, t] : ckpt.opt.v) entries.emplace_back("opt.v." + name, &t);

    std::string payload;
    nlohmann::json dir = nlohmann::json::array();
    for (const auto& [name, t] : entries) {
        nlohmann::json e{{"name", name}, {"dtype", "f32"}, {"shape", t->shape},
                         {"offset", payload.size()}};
        dir.push_back(e);
        append_f32_le(payload, t->data(), t->numel());
    }

    nlohmann::json header{
        {"format", 1},
        {"kind", ckpt.kind == Checkpoint::Kind::Base ? "base" : "adapter"},
        {"model_config", nlohmann::json::parse(ckpt.config.to_json())},
        {"schedule", {{"tsteps", ckpt.config.tsteps}, {"beta_start", ckpt.beta_start}, {"beta_end", ckpt.beta_end}}},
        {"meta",
         {{"step", ckpt.step},
          {"seed", ckpt.seed},
          {"config_hash", hash_hex(ckpt.config.hash())},
          {"base_params_hash", hash_hex(ckpt.base_params_hash)}}},
        {"optimizer", {{"step", ckpt.opt.step}}},
        {"tensors", dir},
    };
    if (ckpt.kind == Checkpoint::Kind::Adapter)
        header["lora"] = {{"rank", ckpt.adapter.rank},
                          {"alpha", ckpt.adapter.alpha},
                          {"targets", target_spec_name(ckpt.adapter.spec)}};

    std::string head = header.dump();
    std::string blob(kMagic, sizeof kMagic);
    put_u64(blob, head.size());
    blob += head;
    blob += payload;
    uint32_t crc = crc32_bytes(head.data(), head.size());
    crc = crc32_bytes(payload.data(), payload.size(), crc);
    put_u64(blob, crc);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_checkpoint: cannot open " + path);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_checkpoint: cannot open " + path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (blob.size() < sizeof(kMagic) + 16) throw IoError("load_checkpoint: truncated container");
    if (std::memcmp(blob.data(), kMagic, sizeof kMagic) != 0)
        throw IoError("load_checkpoint: bad magic (not a checkpoint container)");
    uint64_t head_len = get_u64(blob.data() + 8);
    size_t head_off = sizeof(kMagic) + 8;
    if (head_off + head_len + 8 > blob.size()) throw IoError("load_checkpoint: truncated header");
    std::string head = blob.substr(head_off, head_len);
    size_t payload_off = head_off + head_len;
    size_t payload_len = blob.size() - payload_off - 8;
    uint64_t stored_crc = get_u64(blob.data() + blob.size() - 8);
    uint32_t crc = crc32_bytes(head.data(), head.size());
    crc = crc32_bytes(blob.data() + payload_off, payload_len, crc);
    if (crc != static_cast<uint32_t>(stored_crc))
        throw IoError("load_checkpoint: checksum mismatch, container is corrupt");

    nlohmann::json header = nlohmann::json::parse(head);
    Checkpoint ckpt;
    ckpt.kind = header.at("kind") == "base" ? Checkpoint::Kind::Base : Checkpoint::Kind::Adapter;
    ckpt.config = ModelConfig::from_json(header.at("model_config").dump());
    ckpt.beta_start = header.at("schedule").at("beta_start");
    ckpt.beta_end = header.at("schedule").at("beta_end");
    ckpt.step = header.at("meta").at("step");
    ckpt.seed = header.at("meta").at("seed");
    ckpt.base_params_hash =
        std::stoull(header.at("meta").at("base_params_hash").get<std::string>(), nullptr, 16);
    ckpt.opt.step = header.at("optimizer").at("step");

    if (ckpt.kind == Checkpoint::Kind::Adapter) {
        ckpt.adapter.rank = header.at("lora").at("rank");
        ckpt.adapter.alpha = header.at("lora").at("alpha");
        auto spec = target_spec_from_name(header.at("lora").at("targets").get<std::string>());
        if (!spec) throw IoError("load_checkpoint: unknown lora target spec");
        ckpt.adapter.spec = *spec;
    } else {
        ckpt.base.cfg = ckpt.config;
    }

    const char* payload = blob.data() + payload_off;
    for (const auto& e : header.at("tensors")) {
        std::string name = e.at("name");
        std::vector<int> shape = e.at("shape").get<std::vector<int>>();
        size_t offset = e.at("offset");
        TensorF t(shape);
        if (offset + static_cast<size_t>(t.numel()) * 4 > payload_len)
            throw IoError("load_checkpoint: tensor " + name + " overruns payload");
        read_f32_le(payload + offset, t.data(), t.numel());

        if (name.rfind("opt.m.", 0) == 0)
            ckpt.opt.m.emplace(name.substr(6), std::move(t));
        else if (name.rfind("opt.v.", 0) == 0)
            ckpt.opt.v.emplace(name.substr(6), std::move(t));
        else if (name.rfind("lora.", 0) == 0) {
            std::string rest = name.substr(5);
            bool is_a = rest.size() > 2 && rest.compare(rest.size() - 2, 2, ".A") == 0;
            bool is_b = rest.size() > 2 && rest.compare(rest.size() - 2, 2, ".B") == 0;
            if (!is_a && !is_b) throw IoError("load_checkpoint: malformed lora tensor name " + name);
            std::string layer = rest.substr(0, rest.size() - 2);
            auto& ab = ckpt.adapter.layers[layer];
            (is_a ? ab.first : ab.second) = std::move(t);
        } else {
            ckpt.base.tensors.emplace(name, std::move(t));
        }
    }
    return ckpt;
}

void verify_adapter_matches(const Checkpoint& base, const Checkpoint& adapter) {
    if (base.kind != Checkpoint::Kind::Base || adapter.kind != Checkpoint::Kind::Adapter)
        throw ValidationError("verify_adapter_matches: wrong checkpoint kinds");
    if (!(base.config == adapter.config))
        throw ValidationError("verify_adapter_matches: adapter was tuned for a different model config");
    if (adapter.base_params_hash != 0 && adapter.base_params_hash != params_hash(base.base))
        throw ValidationError("verify_adapter_matches: adapter was tuned on different base weights");
}

}  // namespace taskvid
