#include <pybind11/pybind11.h>
PYBIND11_MODULE(_cpal, m) { m.doc() = "placeholder"; }
