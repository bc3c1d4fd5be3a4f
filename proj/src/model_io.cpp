#include "rcabs/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "json.hpp"

#include "rcabs/errors.hpp"

static_assert(std::endian::native == std::endian::little, "model container assumes a little-endian host");

namespace rcabs {
namespace {

using json = nlohmann::json;

constexpr char kMagic[8] = {'R', 'C', 'A', 'B', 'S', 'M', 'D', 'L'};

struct Array {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  std::vector<double> data;  // row-major
};

Array row_major(const std::string& name, const Mat& m) {
  Array a{name, m.rows(), m.cols(), {}};
  a.data.resize(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) a.data[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
  }
  return a;
}

Mat from_row_major(const Array& a) {
  Mat m(a.rows, a.cols);
  for (Index i = 0; i < a.rows; ++i) {
    for (Index j = 0; j < a.cols; ++j) m(i, j) = a.data[static_cast<std::size_t>(i * a.cols + j)];
  }
  return m;
}

Array triples(const SparseMat& s) {
  Array a{"A", s.nonZeros(), 3, {}};
  a.data.reserve(static_cast<std::size_t>(3 * s.nonZeros()));
  for (Index i = 0; i < s.outerSize(); ++i) {
    for (SparseMat::InnerIterator it(s, i); it; ++it) {
      a.data.push_back(static_cast<double>(it.row()));
      a.data.push_back(static_cast<double>(it.col()));
      a.data.push_back(it.value());
    }
  }
  return a;
}

std::vector<double> to_vector(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Vec from_vector(const std::vector<double>& v) {
  Vec out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Index>(i)] = v[i];
  return out;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw IoError("model container: " + what);
}

}  // namespace

void write_model(const Model& model, std::ostream& out) {
  const Reservoir& res = model.reservoir;
  std::vector<Array> arrays;
  arrays.push_back(triples(res.A));
  arrays.push_back(row_major("B", res.B));
  arrays.push_back(row_major("d", res.d));
  if (model.readout) arrays.push_back(row_major("W", model.readout->W));

  json header;
  header["format_version"] = RCABS_FORMAT_VERSION;
  header["artifact_version"] = RCABS_VERSION;
  header["attractor"] = to_string(model.attractor.kind);
  header["N"] = res.neurons();
  header["k"] = res.inputs();
  header["reservoir"] = {{"spectral_radius", res.params.spectral_radius},
                         {"gamma", res.gamma},
                         {"sparsity", res.params.sparsity},
                         {"input_scale", res.params.input_scale},
                         {"bias_scale", res.params.bias_scale},
                         {"seed", res.params.seed},
                         {"substream", res.substream}};
  const TrainingConfig& tc = model.training;
  header["training"] = {{"transient_s", tc.transient_s},
                        {"learn_s", tc.learn_s},
                        {"dt", tc.dt},
                        {"shifts", tc.shifts},
                        {"shift_direction", to_vector(tc.shift_direction)},
                        {"ridge_beta", tc.ridge_beta},
                        {"initial_state", to_vector(tc.initial_state)}};
  json table = json::array();
  std::uint64_t offset = 0;
  for (const auto& a : arrays) {
    table.push_back({{"name", a.name}, {"rows", a.rows}, {"cols", a.cols}, {"offset", offset}});
    offset += a.data.size() * sizeof(double);
  }
  header["arrays"] = table;

  const std::string text = header.dump();
  const std::uint64_t length = text.size();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&length), sizeof length);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& a : arrays) {
    out.write(reinterpret_cast<const char*>(a.data.data()),
              static_cast<std::streamsize>(a.data.size() * sizeof(double)));
  }
  if (!out) throw IoError("model container: write failed");
}

Model read_model(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  require(in && std::memcmp(magic, kMagic, sizeof magic) == 0, "bad magic");
  std::uint64_t length = 0;
  in.read(reinterpret_cast<char*>(&length), sizeof length);
  require(in && length < (1u << 30), "bad header length");
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  require(static_cast<bool>(in), "truncated header");

  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("model container: malformed header: ") + e.what());
  }
  Model model;
  try {
    require(header.at("format_version").get<int>() == RCABS_FORMAT_VERSION, "unsupported format version");
    model.attractor.kind = parse_attractor_kind(header.at("attractor").get<std::string>());
    const json& r = header.at("reservoir");
    ReservoirParams& p = model.reservoir.params;
    p.n_neurons = header.at("N").get<Index>();
    p.spectral_radius = r.at("spectral_radius").get<double>();
    p.gamma = r.at("gamma").get<double>();
    p.sparsity = r.at("sparsity").get<double>();
    p.input_scale = r.at("input_scale").get<double>();
    p.bias_scale = r.at("bias_scale").get<double>();
    p.seed = r.at("seed").get<std::uint64_t>();
    model.reservoir.gamma = p.gamma;
    model.reservoir.substream = r.at("substream").get<std::uint32_t>();
    const json& t = header.at("training");
    TrainingConfig& tc = model.training;
    tc.transient_s = t.at("transient_s").get<double>();
    tc.learn_s = t.at("learn_s").get<double>();
    tc.dt = t.at("dt").get<double>();
    tc.shifts = t.at("shifts").get<std::vector<double>>();
    tc.shift_direction = from_vector(t.at("shift_direction").get<std::vector<double>>());
    tc.ridge_beta = t.at("ridge_beta").get<double>();
    tc.initial_state = from_vector(t.at("initial_state").get<std::vector<double>>());

    const Index n = p.n_neurons;
    const Index k = header.at("k").get<Index>();
    for (const json& entry : header.at("arrays")) {
      Array a{entry.at("name").get<std::string>(), entry.at("rows").get<Index>(), entry.at("cols").get<Index>(), {}};
      require(a.rows >= 0 && a.cols >= 0 && a.rows * a.cols < (Index{1} << 34), "bad array shape for " + a.name);
      a.data.resize(static_cast<std::size_t>(a.rows * a.cols));
      in.read(reinterpret_cast<char*>(a.data.data()), static_cast<std::streamsize>(a.data.size() * sizeof(double)));
      require(static_cast<bool>(in), "truncated array " + a.name);
      if (a.name == "A") {
        require(a.cols == 3, "A must be stored as triples");
        std::vector<Eigen::Triplet<double>> entries;
        entries.reserve(static_cast<std::size_t>(a.rows));
        for (Index e = 0; e < a.rows; ++e) {
          const auto row = static_cast<Index>(a.data[static_cast<std::size_t>(3 * e)]);
          const auto col = static_cast<Index>(a.data[static_cast<std::size_t>(3 * e + 1)]);
          require(row >= 0 && row < n && col >= 0 && col < n, "A index out of range");
          entries.emplace_back(row, col, a.data[static_cast<std::size_t>(3 * e + 2)]);
        }
        model.reservoir.A.resize(n, n);
        model.reservoir.A.setFromTriplets(entries.begin(), entries.end());
        model.reservoir.A.makeCompressed();
      } else if (a.name == "B") {
        require(a.rows == n && a.cols == k, "B shape mismatch");
        model.reservoir.B = from_row_major(a);
      } else if (a.name == "d") {
        require(a.rows == n && a.cols == 1, "d shape mismatch");
        model.reservoir.d = from_row_major(a).col(0);
      } else if (a.name == "W") {
        require(a.rows == k && a.cols == n, "W shape mismatch");
        model.readout = OutputMatrix{from_row_major(a)};
      } else {
        throw IoError("model container: unknown array " + a.name);
      }
    }
    require(model.reservoir.A.rows() == n && model.reservoir.B.rows() == n && model.reservoir.d.size() == n,
            "missing reservoir arrays");
  } catch (const json::exception& e) {
    throw IoError(std::string("model container: malformed header: ") + e.what());
  }
  return model;
}

void save_model(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_model(model, out);
  out.close();
  if (!out) throw IoError("failed writing " + path);
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model " + path);
  return read_model(in);
}

}  // namespace rcabs
