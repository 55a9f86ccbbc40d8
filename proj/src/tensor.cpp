// Tensor is header-only; this TU anchors the target.
#include "fairrep/tensor.hpp"
