#include "varibad/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace varibad::checkpoint {

namespace {

void write_u64(std::ostream& out, uint64_t x) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((x >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(buf), 8);
}

uint64_t read_u64(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<uint64_t>(buf[i]) << (8 * i);
    return x;
}

void write_doubles(std::ostream& out, const std::vector<double>& xs) {
    static_assert(sizeof(double) == 8);
    for (double d : xs) {
        uint64_t bits;
        std::memcpy(&bits, &d, 8);
        write_u64(out, bits);
    }
}

void read_doubles(std::istream& in, std::vector<double>& xs) {
    for (double& d : xs) {
        uint64_t bits = read_u64(in);
        std::memcpy(&d, &bits, 8);
    }
}

nlohmann::json read_manifest(std::istream& in) {
    std::string magic(std::strlen(kMagic), '\0');
    in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
    if (!in || magic != kMagic) throw std::runtime_error("checkpoint: bad magic header");
    uint64_t len = read_u64(in);
    std::string buf(len, '\0');
    in.read(buf.data(), static_cast<std::streamsize>(len));
    if (!in) throw std::runtime_error("checkpoint: truncated manifest");
    return nlohmann::json::parse(buf);
}

}  // namespace

void save(const std::string& path, const std::vector<std::pair<std::string, const ParamStore*>>& stores,
          const nlohmann::json& meta) {
    nlohmann::json manifest;
    manifest["version"] = 1;
    manifest["meta"] = meta;
    auto jstores = nlohmann::json::array();
    for (const auto& [name, store] : stores) {
        nlohmann::json js;
        js["name"] = name;
        auto jparams = nlohmann::json::array();
        for (const Param* p : store->all())
            jparams.push_back({{"name", p->name}, {"rows", p->value.rows}, {"cols", p->value.cols}});
        js["params"] = jparams;
        jstores.push_back(js);
    }
    manifest["stores"] = jstores;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    std::string mstr = manifest.dump();
    out.write(kMagic, static_cast<std::streamsize>(std::strlen(kMagic)));
    write_u64(out, mstr.size());
    out.write(mstr.data(), static_cast<std::streamsize>(mstr.size()));
    for (const auto& [name, store] : stores) {
        for (const Param* p : store->all()) {
            write_doubles(out, p->value.v);
            write_doubles(out, p->adam_m.v);
            write_doubles(out, p->adam_v.v);
        }
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

nlohmann::json load(const std::string& path,
                    const std::vector<std::pair<std::string, ParamStore*>>& stores) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    nlohmann::json manifest = read_manifest(in);
    const auto& jstores = manifest.at("stores");
    if (jstores.size() != stores.size()) throw std::runtime_error("checkpoint: store count mismatch");
    for (size_t si = 0; si < stores.size(); ++si) {
        const auto& [name, store] = stores[si];
        const auto& js = jstores[si];
        if (js.at("name").get<std::string>() != name)
            throw std::runtime_error("checkpoint: store name mismatch: " + name);
        for (const auto& jp : js.at("params")) {
            Param& p = store->get(jp.at("name").get<std::string>());
            if (p.value.rows != jp.at("rows").get<int>() || p.value.cols != jp.at("cols").get<int>())
                throw std::runtime_error("checkpoint: shape mismatch for " + p.name);
            read_doubles(in, p.value.v);
            read_doubles(in, p.adam_m.v);
            read_doubles(in, p.adam_v.v);
        }
    }
    if (!in) throw std::runtime_error("checkpoint: truncated payload");
    return manifest.at("meta");
}

nlohmann::json read_meta(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    return read_manifest(in).at("meta");
}

}  // namespace varibad::checkpoint
