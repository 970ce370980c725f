#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dscore/types.hpp"

namespace dscore {

struct LineDiagnostic {
    std::string file;
    std::size_t line_no = 0;  // 1-based
    std::string message;
};

inline std::string to_string(const LineDiagnostic& d) {
    std::ostringstream os;
    os << d.file << ":" << d.line_no << ": " << d.message;
    return os.str();
}

// Reads a JSONL file, invoking on_record for each parsed line. Parse failures
// are collected as diagnostics; whether they abort is the caller's policy.
inline std::vector<LineDiagnostic> read_jsonl(
    const std::string& path, const std::function<void(Json&&, std::size_t)>& on_record) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::vector<LineDiagnostic> diags;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            diags.push_back({path, line_no, "malformed JSON line"});
            continue;
        }
        on_record(std::move(j), line_no);
    }
    return diags;
}

template <class T, class FromJson>
std::vector<T> load_jsonl_strict(const std::string& path, FromJson&& from_json_fn) {
    std::vector<T> out;
    auto diags = read_jsonl(path, [&](Json&& j, std::size_t line_no) {
        try {
            out.push_back(from_json_fn(j));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    });
    if (!diags.empty()) throw std::runtime_error(to_string(diags.front()));
    return out;
}

inline std::vector<Segment> load_segments(const std::string& path) {
    return load_jsonl_strict<Segment>(path, [](const Json& j) { return segment_from_json(j); });
}

inline std::vector<QAPair> load_qa_pairs(const std::string& path) {
    return load_jsonl_strict<QAPair>(path, [](const Json& j) { return qa_from_json(j); });
}

inline std::vector<MCQItem> load_mcq_items(const std::string& path) {
    return load_jsonl_strict<MCQItem>(path, [](const Json& j) { return mcq_from_json(j); });
}

// Single-writer append with ordered flush; data lines carry no timestamps so
// identical inputs serialize byte-identically.
class JsonlWriter {
  public:
    explicit JsonlWriter(const std::string& path) : path_(path), out_(path, std::ios::trunc) {
        if (!out_) throw std::runtime_error("cannot open file for writing: " + path);
    }

    void write(const Json& j) {
        out_ << j.dump() << '\n';
        ++count_;
    }

    void flush() { out_.flush(); }
    std::size_t count() const { return count_; }
    const std::string& path() const { return path_; }

  private:
    std::string path_;
    std::ofstream out_;
    std::size_t count_ = 0;
};

template <class T>
void write_jsonl(const std::string& path, const std::vector<T>& items) {
    JsonlWriter w(path);
    for (const auto& item : items) w.write(to_json(item));
    w.flush();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << content;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Atomic-enough replace: write to a sibling temp file, then rename over the
// target, so a process killed mid-write never leaves a torn file behind.
inline void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    write_text_file(tmp, content);
    std::filesystem::rename(tmp, path);
}

}  // namespace dscore
