#include "jnn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "jnn/error.hpp"

namespace jnn {

namespace {

constexpr char kMagic[8] = {'J', 'N', 'N', 'C', 'K', 'P', 'T', '\1'};

void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<char*>(&v), 4); }
void put_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<char*>(&v), 8); }
void put_str(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

struct Reader {
    const std::vector<char>& buf;
    size_t pos = 0;
    const std::string& file;

    void need(size_t n) const {
        if (pos + n > buf.size()) throw IoError("truncated checkpoint: " + file);
    }
    uint32_t u32() {
        need(4);
        uint32_t v;
        std::memcpy(&v, buf.data() + pos, 4);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v;
        std::memcpy(&v, buf.data() + pos, 8);
        pos += 8;
        return v;
    }
    std::string str() {
        const uint32_t n = u32();
        need(n);
        std::string s(buf.data() + pos, n);
        pos += n;
        return s;
    }
    void doubles(double* dst, size_t n) {
        need(n * 8);
        std::memcpy(dst, buf.data() + pos, n * 8);
        pos += n * 8;
    }
};

std::string hex64(uint64_t v) {
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const JointModel& model, uint64_t digest,
                     uint32_t epoch, const std::string& rng_state) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write checkpoint " + path.string());
    f.write(kMagic, 8);
    put_u32(f, 1);  // version
    put_u64(f, digest);
    put_u32(f, epoch);
    put_str(f, model.spec().to_text());
    put_str(f, rng_state);
    const auto& params = model.parameters();
    put_u32(f, static_cast<uint32_t>(params.size()));
    for (const auto& p : params) {
        put_str(f, p->name);
        put_u32(f, static_cast<uint32_t>(p->value.ndim()));
        for (int64_t d : p->value.shape()) put_u32(f, static_cast<uint32_t>(d));
        f.write(reinterpret_cast<const char*>(p->value.data()),
                static_cast<std::streamsize>(p->value.numel() * 8));
    }
    if (!f) throw IoError("short write to checkpoint " + path.string());
}

CheckpointMeta load_checkpoint(const std::filesystem::path& path, JointModel& model,
                               uint64_t expected_digest) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint " + path.string());
    std::vector<char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const std::string file = path.string();
    Reader r{buf, 0, file};

    r.need(8);
    if (std::memcmp(buf.data(), kMagic, 8) != 0)
        throw IoError("not a checkpoint file: " + file);
    r.pos = 8;

    CheckpointMeta meta;
    meta.version = r.u32();
    if (meta.version != 1)
        throw IoError("unsupported checkpoint version " + std::to_string(meta.version));
    meta.digest = r.u64();
    if (meta.digest != expected_digest)
        throw IoError("checkpoint/config digest mismatch: checkpoint " + hex64(meta.digest) +
                      ", config " + hex64(expected_digest));
    meta.epoch = r.u32();
    meta.spec_text = r.str();
    if (meta.spec_text != model.spec().to_text())
        throw IoError("checkpoint architecture does not match the configured model");
    meta.rng_state = r.str();

    const auto& params = model.parameters();
    const uint32_t count = r.u32();
    if (count != params.size())
        throw IoError("checkpoint parameter count mismatch: " + std::to_string(count) + " vs " +
                      std::to_string(params.size()));
    // stage all values before applying so a truncated file leaves no partial model
    std::vector<std::vector<double>> staged(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
        const std::string name = r.str();
        if (name != params[i]->name)
            throw IoError("checkpoint parameter '" + name + "' does not match '" +
                          params[i]->name + "'");
        const uint32_t nd = r.u32();
        std::vector<int64_t> shape;
        for (uint32_t d = 0; d < nd; ++d) shape.push_back(r.u32());
        if (shape != params[i]->value.shape())
            throw IoError("checkpoint parameter '" + name + "' shape mismatch");
        staged[i].resize(static_cast<size_t>(params[i]->value.numel()));
        r.doubles(staged[i].data(), staged[i].size());
    }
    for (size_t i = 0; i < params.size(); ++i)
        std::memcpy(params[i]->value.data(), staged[i].data(), staged[i].size() * 8);
    return meta;
}

}  // namespace jnn
