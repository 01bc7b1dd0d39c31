#pragma once

#include <iosfwd>
#include <string>

#include "liqjump/config.hpp"

namespace liqjump {

// Each command writes under cfg.out_dir only and refreshes the manifest.
void cmd_synth(const RunConfig& cfg, std::ostream& log);
void cmd_liquidity(const RunConfig& cfg, std::ostream& log);
void cmd_backtest(const RunConfig& cfg, std::ostream& log);
// Renders the backtest report (and beta tables when present) as text.
void cmd_report(const RunConfig& cfg, std::ostream& out);

}  // namespace liqjump
