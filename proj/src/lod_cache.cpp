#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "lodgpe/errors.hpp"
#include "lodgpe/lod.hpp"

namespace lodgpe {

namespace {

constexpr const char* kMagic = "LODGPE-CORRECTORS";
constexpr int kFormatVersion = 1;

// FNV-1a, 64 bit.
struct Fnv {
  std::uint64_t h = 1469598103934665603ull;
  void add(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  }
};

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

}  // namespace

std::string CorrectorKey::canonical() const {
  std::ostringstream s;
  s << std::setprecision(17) << "domain=" << domain.xmin << ',' << domain.xmax << ',' << domain.ymin << ','
    << domain.ymax << ";coarse_cells=" << coarse_cells << ";refinements=" << refinements
    << ";potential=" << potential << ";localization=" << localization << ";version=" << kFormatVersion;
  return s.str();
}

std::filesystem::path cache_path(const std::filesystem::path& dir, const CorrectorKey& key) {
  Fnv f;
  const std::string k = key.canonical();
  f.add(k.data(), k.size());
  return dir / ("lod_" + hex64(f.h) + ".bin");
}

const char* to_string(CacheStatus s) {
  switch (s) {
    case CacheStatus::hit:
      return "hit";
    case CacheStatus::missing:
      return "missing";
    case CacheStatus::mismatch:
      return "mismatch";
    case CacheStatus::corrupt:
      return "corrupt";
  }
  return "?";
}

void save_lod_space(const std::filesystem::path& file, const CorrectorKey& key, const LodSpace& space) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  const auto tmp = std::filesystem::path(file.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write corrector cache " + tmp.string());
    out << kMagic << ' ' << kFormatVersion << '\n'
        << key.canonical() << '\n'
        << space.fine_dim() << ' ' << space.dim() << '\n';
    Fnv f;
    auto put = [&](const DenseMatrix& m) {
      const auto bytes = static_cast<std::size_t>(m.size()) * sizeof(double);
      out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(bytes));
      f.add(m.data(), bytes);
    };
    put(space.basis);
    put(space.a_lod);
    put(space.m_lod);
    out << '\n' << hex64(f.h) << '\n';
    if (!out) throw std::runtime_error("failed writing corrector cache " + tmp.string());
  }
  std::filesystem::rename(tmp, file);
}

CacheStatus load_lod_space(const std::filesystem::path& file, const CorrectorKey& key, LodSpace& space) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return CacheStatus::missing;

  std::string line;
  if (!std::getline(in, line)) return CacheStatus::corrupt;
  std::istringstream head(line);
  std::string magic;
  int version = 0;
  if (!(head >> magic >> version) || magic != kMagic) return CacheStatus::corrupt;
  if (version != kFormatVersion) return CacheStatus::mismatch;
  if (!std::getline(in, line)) return CacheStatus::corrupt;
  if (line != key.canonical()) return CacheStatus::mismatch;
  if (!std::getline(in, line)) return CacheStatus::corrupt;
  std::istringstream dims(line);
  long long nf = -1, nc = -1;
  if (!(dims >> nf >> nc)) return CacheStatus::corrupt;
  if (nf != static_cast<long long>(space.fine_dofs.size()) || nc != static_cast<long long>(space.coarse_dofs.size()))
    return CacheStatus::mismatch;

  Fnv f;
  auto get = [&](DenseMatrix& m, Eigen::Index r, Eigen::Index c) {
    m.resize(r, c);
    const auto bytes = static_cast<std::size_t>(m.size()) * sizeof(double);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(bytes));
    f.add(m.data(), bytes);
    return static_cast<bool>(in);
  };
  if (!get(space.basis, nf, nc) || !get(space.a_lod, nc, nc) || !get(space.m_lod, nc, nc)) return CacheStatus::corrupt;
  std::string trailer;
  std::getline(in, line);
  if (!std::getline(in, trailer) || trailer != hex64(f.h)) return CacheStatus::corrupt;
  return CacheStatus::hit;
}

}  // namespace lodgpe
