#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace conmask {

// Identifies the bundled stop-word list; recorded in corpus bundles so a
// bundle built with a different list is detectable.
inline constexpr std::string_view kStopWordListVersion = "conmask-stop-v1";

// Lowercases ASCII, splits on every byte that is not an ASCII letter or
// digit (bytes >= 0x80 are kept so UTF-8 words survive intact), and drops
// bundled stop words. Digits are kept.
std::vector<std::string> tokenize(std::string_view text);

bool is_stop_word(std::string_view token);

}  // namespace conmask
