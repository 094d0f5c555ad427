#include <pybind11/pybind11.h>
PYBIND11_MODULE(_treespin, m) { m.doc() = "placeholder"; }
