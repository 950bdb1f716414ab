#include "ldt/io/artifacts.hpp"

#include <cstring>
#include <fstream>
#include <utility>

#include "ldt/errors.hpp"

namespace ldt::io {

namespace {

using nlohmann::json;

std::int64_t element_count(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (std::int64_t s : shape) {
    if (s < 0) throw config_error("artifact shape entries must be nonnegative");
    n *= s;
  }
  return n;
}

}  // namespace

json ArtifactManifest::to_json() const {
  json j;
  j["run_id"] = run_id;
  j["config_hash"] = config_hash;
  j["blob_file"] = blob_file;
  j["scalars"] = scalars;
  j["notes"] = notes;
  j["arrays"] = json::array();
  for (const ArrayRecord& r : arrays) {
    j["arrays"].push_back({{"name", r.name},
                           {"shape", r.shape},
                           {"byte_offset", r.byte_offset},
                           {"dtype", r.dtype},
                           {"encoding", r.encoding}});
  }
  return j;
}

ArtifactManifest ArtifactManifest::from_json(const json& j) {
  ArtifactManifest m;
  try {
    m.run_id = j.at("run_id").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::uint64_t>();
    m.blob_file = j.at("blob_file").get<std::string>();
    m.scalars = j.at("scalars").get<std::map<std::string, double>>();
    m.notes = j.at("notes").get<std::map<std::string, std::string>>();
    for (const auto& e : j.at("arrays")) {
      ArrayRecord r;
      r.name = e.at("name").get<std::string>();
      r.shape = e.at("shape").get<std::vector<std::int64_t>>();
      r.byte_offset = e.at("byte_offset").get<std::uint64_t>();
      r.dtype = e.at("dtype").get<std::string>();
      r.encoding = e.at("encoding").get<std::string>();
      m.arrays.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw config_error(std::string("malformed artifact manifest: ") + e.what());
  }
  return m;
}

ArtifactWriter::ArtifactWriter(std::filesystem::path directory, std::string stem)
    : dir_(std::move(directory)), stem_(std::move(stem)) {
  manifest_.blob_file = stem_ + ".bin";
}

void ArtifactWriter::add_matrix(const std::string& name, const Matrix& m) {
  std::vector<double> row_major(static_cast<std::size_t>(m.size()));
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) row_major[k++] = m(i, j);
  add_array(name, {m.rows(), m.cols()}, row_major.data(), row_major.size());
}

void ArtifactWriter::add_vector(const std::string& name, const Vector& v) {
  add_array(name, {v.size()}, v.data(), static_cast<std::size_t>(v.size()));
}

void ArtifactWriter::add_array(const std::string& name, const std::vector<std::int64_t>& shape,
                               const double* data, std::size_t count) {
  if (finalized_) throw config_error("artifact writer already finalized");
  if (static_cast<std::int64_t>(count) != element_count(shape))
    throw dimension_error("artifact '" + name + "': count does not match shape");
  for (const ArrayRecord& r : manifest_.arrays)
    if (r.name == name) throw config_error("duplicate artifact array '" + name + "'");
  ArrayRecord rec;
  rec.name = name;
  rec.shape = shape;
  rec.byte_offset = blob_.size() * sizeof(double);
  manifest_.arrays.push_back(std::move(rec));
  blob_.insert(blob_.end(), data, data + count);
}

void ArtifactWriter::add_scalar(const std::string& name, double value) {
  manifest_.scalars[name] = value;
}

void ArtifactWriter::add_note(const std::string& name, const std::string& value) {
  manifest_.notes[name] = value;
}

void ArtifactWriter::set_run_id(const std::string& id) { manifest_.run_id = id; }

void ArtifactWriter::set_config_hash(std::uint64_t h) { manifest_.config_hash = h; }

void ArtifactWriter::finalize() {
  if (finalized_) throw config_error("artifact writer already finalized");
  finalized_ = true;
  std::filesystem::create_directories(dir_);
  const std::filesystem::path blob_path = dir_ / manifest_.blob_file;
  {
    std::ofstream out(blob_path, std::ios::binary | std::ios::trunc);
    if (!out) throw config_error("cannot write " + blob_path.string());
    out.write(reinterpret_cast<const char*>(blob_.data()),
              static_cast<std::streamsize>(blob_.size() * sizeof(double)));
    if (!out) throw config_error("write failed for " + blob_path.string());
  }
  const std::filesystem::path manifest_path = dir_ / (stem_ + ".json");
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw config_error("cannot write " + manifest_path.string());
  out << manifest_.to_json().dump(2) << "\n";
  if (!out) throw config_error("write failed for " + manifest_path.string());
}

ArtifactReader::ArtifactReader(const std::filesystem::path& manifest_file)
    : dir_(manifest_file.parent_path()) {
  std::ifstream in(manifest_file);
  if (!in) throw config_error("cannot open " + manifest_file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error("invalid JSON in " + manifest_file.string() + ": " + e.what());
  }
  manifest_ = ArtifactManifest::from_json(j);
}

bool ArtifactReader::has_array(const std::string& name) const {
  for (const ArrayRecord& r : manifest_.arrays)
    if (r.name == name) return true;
  return false;
}

Matrix ArtifactReader::read_matrix(const std::string& name) const {
  const ArrayRecord* rec = nullptr;
  for (const ArrayRecord& r : manifest_.arrays)
    if (r.name == name) rec = &r;
  if (!rec) throw config_error("artifact array '" + name + "' not found");
  if (rec->shape.size() != 1 && rec->shape.size() != 2)
    throw dimension_error("artifact array '" + name + "' is not 1-D or 2-D");
  const Eigen::Index rows = rec->shape[0];
  const Eigen::Index cols = rec->shape.size() == 2 ? rec->shape[1] : 1;
  std::vector<double> buf(static_cast<std::size_t>(rows * cols));
  const std::filesystem::path blob_path = dir_ / manifest_.blob_file;
  std::ifstream in(blob_path, std::ios::binary);
  if (!in) throw config_error("cannot open " + blob_path.string());
  in.seekg(static_cast<std::streamoff>(rec->byte_offset));
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(double)));
  if (!in) throw config_error("short read from " + blob_path.string());
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = buf[k++];
  return m;
}

Vector ArtifactReader::read_vector(const std::string& name) const {
  Matrix m = read_matrix(name);
  if (m.cols() != 1) throw dimension_error("artifact array '" + name + "' is not a vector");
  return m.col(0);
}

double ArtifactReader::scalar(const std::string& name) const {
  auto it = manifest_.scalars.find(name);
  if (it == manifest_.scalars.end())
    throw config_error("artifact scalar '" + name + "' not found");
  return it->second;
}

}  // namespace ldt::io
