#pragma once

#include <chrono>
#include <functional>
#include <string>

namespace beamassist {

// Wall clock used for timestamps in logs and notebooks; tests inject a fixed one.
using WallClock = std::function<std::chrono::system_clock::time_point()>;

WallClock system_wall_clock();
std::string iso8601_utc(std::chrono::system_clock::time_point tp);

}  // namespace beamassist
