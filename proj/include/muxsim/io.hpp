#pragma once

#include <string>
#include <utility>
#include <vector>

namespace muxsim {

// Fixed-format floating point rendering used for every exported number, so
// identical runs produce byte-identical files on any worker count.
std::string format_double(double v);

// Ordered key/value summary ("key = value" lines).
class Summary {
  public:
    void set(const std::string& key, double value);
    void set(const std::string& key, const std::string& value);
    void write(const std::string& path) const;
    const std::vector<std::pair<std::string, std::string>>& entries() const {
        return entries_;
    }
    // Value lookup (linear; summaries are small). Throws if absent.
    const std::string& get(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool has(const std::string& key) const;

  private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

// CSV with a fixed header; all cells numeric.
void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows);

void ensure_directory(const std::string& dir);

}  // namespace muxsim
