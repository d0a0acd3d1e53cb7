#pragma once

#include <mutex>

namespace soundgrid {

// FFTW's planner is not thread-safe; every plan creation and destruction
// in the library holds this lock.
std::mutex& fftw_planner_mutex();

} // namespace soundgrid
