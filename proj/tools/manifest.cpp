#include "manifest.hpp"

#include "changetrace/chain.hpp"
#include "changetrace/parallel.hpp"

#include <array>
#include <fstream>
#include <iterator>
#include <memory>

#include <openssl/evp.h>

namespace ct::cli {

namespace {

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free)
    {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256 init failed");
    }
    void update(const char* data, std::size_t n)
    {
        if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw Error("sha256 update failed");
    }
    std::string hex()
    {
        std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
        unsigned len = 0;
        if (EVP_DigestFinal_ex(ctx_.get(), md.data(), &len) != 1) throw Error("sha256 final failed");
        static constexpr char digits[] = "0123456789abcdef";
        std::string s;
        for (unsigned i = 0; i < len; ++i) {
            s += digits[md[i] >> 4];
            s += digits[md[i] & 15];
        }
        return s;
    }

private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string sha256_hex(const std::string& bytes)
{
    Sha256 h;
    h.update(bytes.data(), bytes.size());
    return h.hex();
}

std::string file_sha256(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p.string());
    Sha256 h;
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return h.hex();
}

void RunManifest::write(const std::filesystem::path& where) const
{
    using ojson = nlohmann::ordered_json;
    ojson j;
    j["subcommand"] = subcommand_;
    j["tool_version"] = kToolVersion;
    j["config_hash"] = sha256_hex(options_.dump());
    j["seed"] = seed_ ? ojson(*seed_) : ojson(nullptr);
    j["threads"] = thread_count();
    j["options"] = options_;
    auto digests = [](const std::vector<std::filesystem::path>& files) {
        auto arr = ojson::array();
        for (const auto& f : files) arr.push_back({{"path", f.string()}, {"sha256", file_sha256(f)}});
        return arr;
    };
    j["inputs"] = digests(inputs_);
    j["outputs"] = digests(outputs_);
    auto t = ojson::object();
    for (const auto& [phase, secs] : timings_) t[phase] = secs;
    j["timings_seconds"] = t;
    std::ofstream out(where);
    if (!out) throw Error("cannot write " + where.string());
    out << j.dump(2) << '\n';
}

}  // namespace ct::cli
