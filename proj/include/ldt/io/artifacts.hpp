#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldt/problem.hpp"

namespace ldt::io {

/// One named float64 array inside the run's blob file.
struct ArrayRecord {
  std::string name;
  std::vector<std::int64_t> shape;
  std::uint64_t byte_offset = 0;
  std::string dtype = "float64";
  std::string encoding = "little-endian row-major";
};

/// Sidecar JSON describing every artifact of a run: scalar results with
/// full precision, and the layout of the raw array blob.
struct ArtifactManifest {
  std::string run_id;
  std::uint64_t config_hash = 0;
  std::string blob_file;
  std::map<std::string, double> scalars;
  std::map<std::string, std::string> notes;
  std::vector<ArrayRecord> arrays;

  nlohmann::json to_json() const;
  static ArtifactManifest from_json(const nlohmann::json& j);
};

/// Accumulates arrays into `<stem>.bin` and metadata into `<stem>.json`.
class ArtifactWriter {
 public:
  ArtifactWriter(std::filesystem::path directory, std::string stem);

  void add_matrix(const std::string& name, const Matrix& m);  // row-major
  void add_vector(const std::string& name, const Vector& v);
  void add_array(const std::string& name, const std::vector<std::int64_t>& shape,
                 const double* data, std::size_t count);  // row-major order
  void add_scalar(const std::string& name, double value);
  void add_note(const std::string& name, const std::string& value);
  void set_run_id(const std::string& id);
  void set_config_hash(std::uint64_t h);

  /// Writes blob + manifest; the writer is spent afterwards.
  void finalize();

 private:
  std::filesystem::path dir_;
  std::string stem_;
  ArtifactManifest manifest_;
  std::vector<double> blob_;
  bool finalized_ = false;
};

class ArtifactReader {
 public:
  explicit ArtifactReader(const std::filesystem::path& manifest_file);

  const ArtifactManifest& manifest() const { return manifest_; }
  bool has_array(const std::string& name) const;
  /// Reads a 2-D (or 1-D, as single column) array back as a dense matrix.
  Matrix read_matrix(const std::string& name) const;
  Vector read_vector(const std::string& name) const;
  double scalar(const std::string& name) const;

 private:
  std::filesystem::path dir_;
  ArtifactManifest manifest_;
};

}  // namespace ldt::io
