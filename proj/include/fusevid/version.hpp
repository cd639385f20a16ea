#pragma once

namespace fusevid {

// Recorded into every run directory next to the resolved config so a run
// can be tied to the exact build that produced it.
inline constexpr const char* kVersionString = "fusevid 1.0.0";

}  // namespace fusevid
