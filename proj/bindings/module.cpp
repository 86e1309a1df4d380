#include <pybind11/pybind11.h>

PYBIND11_MODULE(_gennli, m) {
  m.doc() = "GenNLI core bindings";
}
