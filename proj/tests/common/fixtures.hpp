#pragma once

#include <iterator>
#include <random>
#include <string>

// Programs shared by the unit and acceptance suites.
namespace fixtures {

inline constexpr const char* kTimedLoop =
    "import time\n"
    "\n"
    "start_time = time.time()\n"
    "end_time = start_time + 60\n"
    "\n"
    "while time.time() < end_time:\n"
    "    loop_start = time.time()\n"
    "    sam.measure(1)\n"
    "    elapsed = time.time() - loop_start\n"
    "    if elapsed < 10:\n"
    "        time.sleep(10 - elapsed)\n";

// Incident-angle scan, "Scan incident angle from 0.05 to 1.5 degree".
inline constexpr const char* kScanRef1 =
    "for angle in np.arange(0.05, 1.5 + 0.02, 0.02):\n"
    "    sam.thabs(angle)\n"
    "    sam.measure(exposure_time=0.5)";
inline constexpr const char* kScanRef2 =
    "for th in np.arange(0.05, 1.5+0.02, 0.02):\n"
    "    sam.thabs(th)\n"
    "    sam.measure(0.5)";
inline constexpr const char* kScanQwen =
    "for theta in np.arange(0.05, 1.5 + 0.02, 0.02):\n"
    "    sam.thabs(theta)\n"
    "    sam.measure(exposure_time=0.5)";
inline constexpr const char* kScanMistral =
    "for th in np.arange(0.05, 1.5+0.02, 0.02):\n"
    "    sam.thabs(th)\n"
    "    sam.measure(exposure_time=0.5)";

inline constexpr const char* kRamp =
    "sam.setLinkamRate(2)\n"
    "sam.setLinkamTemperature(250)\n"
    "time.sleep(60)\n";

inline constexpr const char* kBusyWait =
    "current_goal_temp = sam.linkamTemperature() + 2\n"
    "\n"
    "sam.setLinkamRate(2)\n"
    "sam.setLinkamTemperature(100)\n"
    "\n"
    "while current_goal_temp < 100 - 0.1:\n"
    "    while sam.linkamTemperature() < current_goal_temp - 0.1:\n"
    "        pass\n"
    "\n"
    "    sam.measure(5)\n"
    "    current_goal_temp += 2\n";

inline std::string random_program(std::mt19937& rng) {
  const char* stmts[] = {
      "sam.measure({n})",
      "sam.thabs({n})",
      "x = {n}",
      "y = x + {n}",
      "time.sleep({n})",
      "sam.xr({n})",
      "for i in range({k}):\n    sam.measure({n})",
      "for th in np.arange(0.05, {n}, 0.1):\n    sam.thabs(th)\n    sam.measure(exposure_time={n})",
      "if x < {n}:\n    sam.snap(1)\nelse:\n    sam.measure(2)",
      "z = 0\nwhile z < {k}:\n    z += 1",
      "wsam()",
  };
  std::uniform_int_distribution<int> pick(0, std::size(stmts) - 1), count(1, 5), num(1, 20);
  std::string out = "x = 1\n";
  for (int k = count(rng); k > 0; --k) {
    std::string s = stmts[pick(rng)];
    for (std::string key : {"{n}", "{k}"})
      for (auto p = s.find(key); p != std::string::npos; p = s.find(key)) s.replace(p, 3, std::to_string(num(rng)));
    out += s + "\n";
  }
  return out;
}

}  // namespace fixtures
