#include "neon/tensor.hpp"

namespace neon {

std::int64_t shape_product(const std::vector<std::int64_t>& extents) {
  std::int64_t p = 1;
  for (std::int64_t e : extents) p *= e;
  return p;
}

std::string shape_str(const std::vector<std::int64_t>& extents) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < extents.size(); ++i) {
    if (i) os << 'x';
    os << extents[i];
  }
  os << ']';
  return os.str();
}

void check_dim(const char* op, const char* lhs_name, std::int64_t lhs,
               const char* rhs_name, std::int64_t rhs) {
  if (lhs != rhs) {
    std::ostringstream os;
    os << op << ": " << lhs_name << " (" << lhs << ") != " << rhs_name << " (" << rhs << ")";
    throw std::invalid_argument(os.str());
  }
}

}  // namespace neon
