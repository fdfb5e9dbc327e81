// Flat-file dataset format.
//
// A dataset is a directory holding one tab-separated file per relation plus a
// query document. The file for a relation is named after its schema
// ("A_B.tsv"), its first line repeats the attribute names, and every further
// line is one row of external value strings. The query document is JSON with
// the keys `attributes`, `relations`, `output`.
//
// ingest interns values in row-scan order, which assigns dense first-seen
// ids; emit writes names back out in the same order. Emitting an ingested
// (or generated) instance and ingesting it again therefore reproduces the ids
// bit for bit.
#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "joinsketch/common.hpp"
#include "joinsketch/model.hpp"

namespace joinsketch {

inline std::string relation_filename(const Schema& s) {
  std::string name;
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) name += "_";
    name += s[i];
  }
  return name + ".tsv";
}

namespace io_detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  for (;;) {
    size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

[[noreturn]] inline void parse_fail(const std::string& file, u64 line,
                                    const std::string& msg) {
  raise(ErrorKind::io, file + ":" + std::to_string(line) + ": " + msg);
}

inline void forward_problems(const std::vector<std::string>& problems,
                             ErrorKind kind) {
  if (problems.empty()) return;
  std::string msg = problems[0];
  for (size_t i = 1; i < problems.size(); ++i) msg += "; " + problems[i];
  raise(kind, msg);
}

}  // namespace io_detail

inline QuerySpec read_query_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::io, "cannot open query file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::io, path + ": " + e.what());
  }
  QuerySpec q;
  try {
    doc.at("attributes").get_to(q.attributes);
    doc.at("relations").get_to(q.relations);
    doc.at("output").get_to(q.output);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::io, path + ": " + e.what());
  }
  io_detail::forward_problems(validate_query(q), ErrorKind::invalid_query);
  return q;
}

inline void write_query_file(const QuerySpec& q, const std::string& path) {
  nlohmann::json doc;
  doc["attributes"] = q.attributes;
  doc["relations"] = q.relations;
  doc["output"] = q.output;
  std::ofstream out(path);
  if (!out) raise(ErrorKind::io, "cannot write query file: " + path);
  out << doc.dump(2) << "\n";
}

inline Instance ingest(const std::string& dir, const QuerySpec& spec) {
  Instance inst;
  for (const Schema& schema : spec.relations) {
    std::string path =
        (std::filesystem::path(dir) / relation_filename(schema)).string();
    std::ifstream in(path);
    if (!in) raise(ErrorKind::io, "cannot open relation file: " + path);
    std::string line;
    if (!std::getline(in, line))
      io_detail::parse_fail(path, 1, "missing header line");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (io_detail::split_tabs(line) != schema)
      io_detail::parse_fail(path, 1, "header does not match schema");
    Relation rel;
    rel.schema = schema;
    u64 lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::vector<std::string> fields = io_detail::split_tabs(line);
      if (fields.size() != schema.size())
        io_detail::parse_fail(path, lineno, "expected " +
                                                std::to_string(schema.size()) +
                                                " fields, got " +
                                                std::to_string(fields.size()));
      Tuple t;
      t.reserve(fields.size());
      for (const std::string& f : fields) {
        if (f.empty()) io_detail::parse_fail(path, lineno, "empty value");
        t.push_back(inst.dict.intern(f));
      }
      rel.rows.push_back(std::move(t));
    }
    inst.relations.push_back(std::move(rel));
  }
  io_detail::forward_problems(validate_instance(inst, spec),
                              ErrorKind::invalid_instance);
  return inst;
}

// Writes query.json plus one TSV per relation into dir (created if absent).
inline void emit(const Instance& inst, const QuerySpec& spec,
                 const std::string& dir) {
  if (inst.relations.size() != spec.relations.size())
    raise(ErrorKind::schema_mismatch,
          "instance does not have one relation per schema");
  std::set<std::string> used;
  for (const Schema& s : spec.relations)
    if (!used.insert(relation_filename(s)).second)
      raise(ErrorKind::unsupported,
            "duplicate relation schemas cannot be emitted to one directory");
  std::filesystem::create_directories(dir);
  write_query_file(spec, (std::filesystem::path(dir) / "query.json").string());
  for (size_t r = 0; r < inst.relations.size(); ++r) {
    const Relation& rel = inst.relations[r];
    std::string path =
        (std::filesystem::path(dir) / relation_filename(rel.schema)).string();
    std::ofstream out(path);
    if (!out) raise(ErrorKind::io, "cannot write relation file: " + path);
    std::string header;
    for (size_t i = 0; i < rel.schema.size(); ++i) {
      if (i) header += "\t";
      header += rel.schema[i];
    }
    out << header << "\n";
    for (const Tuple& t : rel.rows) {
      std::string row;
      for (size_t i = 0; i < t.size(); ++i) {
        std::string name = inst.dict.name(t[i]);
        if (name.find('\t') != std::string::npos ||
            name.find('\n') != std::string::npos)
          raise(ErrorKind::io, "value name contains a delimiter: " + name);
        if (i) row += "\t";
        row += name;
      }
      out << row << "\n";
    }
  }
}

struct Dataset {
  QuerySpec query;
  Instance inst;
};

inline Dataset load_dataset(const std::string& dir,
                            const std::string& query_path) {
  Dataset d;
  d.query = read_query_file(query_path);
  d.inst = ingest(dir, d.query);
  return d;
}

}  // namespace joinsketch
