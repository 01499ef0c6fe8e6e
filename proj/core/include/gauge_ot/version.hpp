#pragma once

namespace gauge_ot {

const char* version();

}  // namespace gauge_ot
