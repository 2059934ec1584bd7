#pragma once

// Text CSI dumps, one row per (packet, tx, rx, subcarrier):
//
//   packet,tx,rx,pilot_index,re,im
//
// Header row required. Rows of one packet must be contiguous and packets
// must appear in increasing order. Channel column = tx * n_rx + rx.

#include <iosfwd>
#include <string>
#include <vector>

#include "csikf/model.hpp"

namespace csikf {

inline constexpr const char* kCsvFormat = "csv-v1";

struct IngestResult {
    std::vector<Observation> observations;
    std::vector<std::string> warnings;  ///< empty input, rejected packets
    int n_tx = 0;
    int n_rx = 0;
};

/// Parses a dump against the pilot set. Packets with missing subcarriers are
/// dropped with a warning. Throws ParseError (with line number) on malformed
/// rows, inconsistent antenna counts or out-of-order packets, and InputError
/// for an unknown format or unreadable file.
IngestResult ingest_csi(std::istream& in, const std::string& format_id, const PilotSet& pilots,
                        double noise_var);
IngestResult ingest_csi(const std::string& path, const std::string& format_id, const PilotSet& pilots,
                        double noise_var);

/// Writes observations with the shortest round-trip representation of every
/// double, so that ingest_csi reproduces them bit for bit.
void write_csi(std::ostream& out, const std::vector<Observation>& observations, int n_tx, int n_rx,
               const PilotSet& pilots);
void write_csi(const std::string& path, const std::vector<Observation>& observations, int n_tx, int n_rx,
               const PilotSet& pilots);

/// Shortest decimal text that parses back to exactly x.
std::string format_double(double x);

}  // namespace csikf
