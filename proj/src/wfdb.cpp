#include "apnea/wfdb.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "apnea/binio.hpp"

namespace apnea {

namespace {

constexpr int kAnnNormal = 1;  // 'N'
constexpr int kAnnApnea = 8;   // 'A'
constexpr int kAnnNum = 60;
constexpr int kAnnSub = 61;
constexpr int kAnnChn = 62;
constexpr int kAnnAux = 63;
constexpr int kAnnSkip = 59;

bool supported_format(int fmt) { return fmt == 212 || fmt == 16; }

std::vector<std::string> tokenize(const std::string& line) {
    std::istringstream is(line);
    std::vector<std::string> tok;
    std::string t;
    while (is >> t) tok.push_back(t);
    return tok;
}

long parse_long(const std::string& s, const char* what) {
    size_t pos = 0;
    long v;
    try {
        v = std::stol(s, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error(std::string("malformed header: bad ") + what + " '" + s + "'");
    }
    if (pos != s.size())
        throw std::runtime_error(std::string("malformed header: bad ") + what + " '" + s + "'");
    return v;
}

double parse_double(const std::string& s, const char* what) {
    size_t pos = 0;
    double v;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error(std::string("malformed header: bad ") + what + " '" + s + "'");
    }
    if (pos != s.size())
        throw std::runtime_error(std::string("malformed header: bad ") + what + " '" + s + "'");
    return v;
}

int32_t sign_extend_12(uint32_t v) {
    return (v & 0x800) ? static_cast<int32_t>(v) - 4096 : static_cast<int32_t>(v);
}

}  // namespace

bool is_test_record(const std::string& record_id) {
    return !record_id.empty() && (record_id[0] == 'x' || record_id[0] == 'X');
}

DatasetSplit split_records(const std::vector<std::string>& record_ids) {
    DatasetSplit split;
    for (const auto& id : record_ids)
        (is_test_record(id) ? split.test_records : split.train_records).push_back(id);
    return split;
}

HeaderInfo parse_header(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    HeaderInfo hdr;
    bool got_record_line = false;

    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;

        auto tok = tokenize(line);
        if (!got_record_line) {
            if (tok.size() < 2) throw std::runtime_error("malformed header: record line");
            // record line: name n_sig [fs [counter_freq(base)] [n_samples ...]]
            hdr.record_name = tok[0];
            // name may carry a /segment-count suffix for multi-segment records
            if (hdr.record_name.find('/') != std::string::npos)
                throw std::runtime_error("multi-segment records are not supported");
            hdr.n_sig = static_cast<int>(parse_long(tok[1], "signal count"));
            if (hdr.n_sig < 1) throw std::runtime_error("malformed header: signal count < 1");
            if (tok.size() >= 3) {
                // fs field may be "fs/counter(base)"; take the leading number
                std::string fs_field = tok[2].substr(0, tok[2].find('/'));
                hdr.fs = parse_double(fs_field, "sampling rate");
            } else {
                hdr.fs = 250.0;  // WFDB default
            }
            if (hdr.fs <= 0) throw std::runtime_error("malformed header: fs <= 0");
            if (tok.size() >= 4) hdr.n_samples = static_cast<uint64_t>(parse_long(tok[3], "sample count"));
            got_record_line = true;
            continue;
        }

        if (static_cast<int>(hdr.signals.size()) == hdr.n_sig) break;  // trailing info lines

        if (tok.size() < 2) throw std::runtime_error("malformed header: signal line");
        SignalInfo sig;
        sig.file_name = tok[0];
        const std::string& fmt_field = tok[1];
        size_t pos = 0;
        long fmt;
        try {
            fmt = std::stol(fmt_field, &pos);
        } catch (const std::exception&) {
            throw std::runtime_error("malformed header: bad format '" + fmt_field + "'");
        }
        if (pos != fmt_field.size()) {
            // xN multipliers, :skew and +offset modifiers are out of scope
            throw std::runtime_error("unsupported format modifier '" + fmt_field + "'");
        }
        sig.fmt = static_cast<int>(fmt);
        if (!supported_format(sig.fmt))
            throw std::runtime_error("unsupported format " + std::to_string(sig.fmt) +
                                     " (supported: 212, 16)");
        if (tok.size() >= 3) {
            // gain field: gain(baseline)/units
            std::string g = tok[2];
            std::optional<int> baseline;
            auto slash = g.find('/');
            if (slash != std::string::npos) {
                sig.units = g.substr(slash + 1);
                g = g.substr(0, slash);
            }
            auto paren = g.find('(');
            if (paren != std::string::npos) {
                auto close = g.find(')', paren);
                if (close == std::string::npos)
                    throw std::runtime_error("malformed header: unclosed baseline");
                baseline = static_cast<int>(
                    parse_long(g.substr(paren + 1, close - paren - 1), "baseline"));
                g = g.substr(0, paren);
            }
            double gain = parse_double(g, "gain");
            sig.gain = (gain == 0.0) ? 200.0 : gain;  // WFDB: 0 means unspecified
            if (tok.size() >= 5) sig.adc_zero = static_cast<int>(parse_long(tok[4], "adc zero"));
            sig.baseline = baseline.value_or(sig.adc_zero);
            if (tok.size() >= 9) {
                sig.description = tok[8];
                for (size_t i = 9; i < tok.size(); ++i) sig.description += " " + tok[i];
            }
        }
        hdr.signals.push_back(std::move(sig));
    }

    if (!got_record_line) throw std::runtime_error("malformed header: empty file");
    if (static_cast<int>(hdr.signals.size()) != hdr.n_sig)
        throw std::runtime_error("malformed header: expected " + std::to_string(hdr.n_sig) +
                                 " signal lines, got " + std::to_string(hdr.signals.size()));
    return hdr;
}

std::string format_header(const HeaderInfo& hdr) {
    std::ostringstream os;
    os << hdr.record_name << " " << hdr.n_sig << " " << hdr.fs;
    if (hdr.n_samples > 0) os << " " << hdr.n_samples;
    os << "\n";
    for (const auto& sig : hdr.signals) {
        os << sig.file_name << " " << sig.fmt << " " << sig.gain;
        if (sig.baseline != sig.adc_zero) os << "(" << sig.baseline << ")";
        os << "/" << sig.units << " 12 " << sig.adc_zero << " 0 0 0";
        if (!sig.description.empty()) os << " " << sig.description;
        os << "\n";
    }
    return os.str();
}

std::vector<int32_t> decode_counts(const std::vector<uint8_t>& bytes, int fmt) {
    std::vector<int32_t> counts;
    if (fmt == 212) {
        size_t full = bytes.size() / 3;
        size_t rem = bytes.size() % 3;
        counts.reserve(2 * full + (rem ? 1 : 0));
        for (size_t f = 0; f < full; ++f) {
            uint32_t b0 = bytes[3 * f], b1 = bytes[3 * f + 1], b2 = bytes[3 * f + 2];
            counts.push_back(sign_extend_12(((b1 & 0x0F) << 8) | b0));
            counts.push_back(sign_extend_12(((b1 & 0xF0) << 4) | b2));
        }
        if (rem == 2) {
            // odd sample count: final sample stored as byte + low nibble
            uint32_t b0 = bytes[3 * full], b1 = bytes[3 * full + 1];
            counts.push_back(sign_extend_12(((b1 & 0x0F) << 8) | b0));
        } else if (rem == 1) {
            throw std::runtime_error("truncated payload: dangling byte in format 212");
        }
    } else if (fmt == 16) {
        if (bytes.size() % 2 != 0)
            throw std::runtime_error("truncated payload: odd byte count in format 16");
        counts.reserve(bytes.size() / 2);
        for (size_t i = 0; i < bytes.size(); i += 2) {
            auto v = static_cast<uint16_t>(bytes[i] | (bytes[i + 1] << 8));
            counts.push_back(static_cast<int16_t>(v));
        }
    } else {
        throw std::runtime_error("unsupported format " + std::to_string(fmt));
    }
    return counts;
}

std::vector<uint8_t> encode_counts(const std::vector<int32_t>& counts, int fmt) {
    std::vector<uint8_t> bytes;
    if (fmt == 212) {
        for (int32_t c : counts)
            if (c < -2048 || c > 2047)
                throw std::invalid_argument("count out of 12-bit range for format 212");
        bytes.reserve((counts.size() / 2) * 3 + 2);
        size_t i = 0;
        for (; i + 1 < counts.size(); i += 2) {
            auto a = static_cast<uint32_t>(counts[i] & 0xFFF);
            auto b = static_cast<uint32_t>(counts[i + 1] & 0xFFF);
            bytes.push_back(static_cast<uint8_t>(a & 0xFF));
            bytes.push_back(static_cast<uint8_t>(((a >> 8) & 0x0F) | (((b >> 8) & 0x0F) << 4)));
            bytes.push_back(static_cast<uint8_t>(b & 0xFF));
        }
        if (i < counts.size()) {
            auto a = static_cast<uint32_t>(counts[i] & 0xFFF);
            bytes.push_back(static_cast<uint8_t>(a & 0xFF));
            bytes.push_back(static_cast<uint8_t>((a >> 8) & 0x0F));
        }
    } else if (fmt == 16) {
        for (int32_t c : counts)
            if (c < -32768 || c > 32767)
                throw std::invalid_argument("count out of 16-bit range for format 16");
        bytes.reserve(counts.size() * 2);
        for (int32_t c : counts) {
            auto v = static_cast<uint16_t>(c & 0xFFFF);
            bytes.push_back(static_cast<uint8_t>(v & 0xFF));
            bytes.push_back(static_cast<uint8_t>(v >> 8));
        }
    } else {
        throw std::invalid_argument("unsupported format " + std::to_string(fmt));
    }
    return bytes;
}

std::vector<std::vector<double>> decode_all_signals(const std::vector<uint8_t>& bytes,
                                                    const HeaderInfo& hdr) {
    if (hdr.signals.empty()) throw std::runtime_error("header has no signals");
    // All Apnea-ECG signal files keep every signal in one format.
    int fmt = hdr.signals[0].fmt;
    for (const auto& s : hdr.signals)
        if (s.fmt != fmt) throw std::runtime_error("mixed per-signal formats are not supported");

    std::vector<int32_t> counts = decode_counts(bytes, fmt);
    auto n_sig = static_cast<size_t>(hdr.n_sig);
    if (counts.size() % n_sig != 0)
        throw std::runtime_error("length/format mismatch: count not divisible by signal count");
    size_t per_sig = counts.size() / n_sig;
    if (hdr.n_samples > 0 && per_sig != hdr.n_samples)
        throw std::runtime_error("length/format mismatch: header declares " +
                                 std::to_string(hdr.n_samples) + " samples, payload has " +
                                 std::to_string(per_sig));

    std::vector<std::vector<double>> out(n_sig);
    for (size_t s = 0; s < n_sig; ++s) out[s].resize(per_sig);
    for (size_t i = 0; i < per_sig; ++i)
        for (size_t s = 0; s < n_sig; ++s) {
            const SignalInfo& sig = hdr.signals[s];
            out[s][i] = (counts[i * n_sig + s] - sig.baseline) / sig.gain;
        }
    return out;
}

std::vector<double> decode_samples(const std::vector<uint8_t>& bytes, const HeaderInfo& hdr) {
    return decode_all_signals(bytes, hdr).front();
}

std::vector<uint8_t> parse_apnea_annotations(const std::vector<uint8_t>& bytes) {
    ByteReader r(bytes);
    std::vector<uint8_t> labels;
    int64_t t = 0;
    int64_t last_t = -1;
    int64_t pending_skip = 0;

    while (r.remaining() >= 2) {
        uint16_t w = r.u16();
        int code = (w >> 10) & 0x3F;
        int delta = w & 0x3FF;
        if (w == 0) break;  // end of stream

        switch (code) {
            case kAnnSkip: {
                if (r.remaining() < 4) throw std::runtime_error("truncated SKIP annotation");
                auto hi = static_cast<uint32_t>(r.u16());
                auto lo = static_cast<uint32_t>(r.u16());
                pending_skip += static_cast<int32_t>((hi << 16) | lo);
                break;
            }
            case kAnnNum:
            case kAnnSub:
            case kAnnChn:
                break;  // modifier of the previous annotation; no time contribution
            case kAnnAux: {
                size_t n = static_cast<size_t>(delta);
                n += n & 1;  // aux strings are padded to even length
                if (r.remaining() < n) throw std::runtime_error("truncated AUX annotation");
                r.skip(n);
                break;
            }
            case kAnnNormal:
            case kAnnApnea: {
                t += pending_skip + delta;
                pending_skip = 0;
                if (t <= last_t) throw std::runtime_error("non-monotonic annotation timestamps");
                last_t = t;
                labels.push_back(code == kAnnApnea ? 1 : 0);
                break;
            }
            default:
                throw std::runtime_error("unknown annotation symbol (code " +
                                         std::to_string(code) + ")");
        }
    }
    return labels;
}

std::vector<uint8_t> write_apnea_annotations(const std::vector<uint8_t>& labels, int fs) {
    if (fs <= 0) throw std::invalid_argument("fs must be positive");
    ByteWriter w;
    int64_t prev_t = 0;
    for (size_t minute = 0; minute < labels.size(); ++minute) {
        int64_t t = static_cast<int64_t>(minute) * 60 * fs;
        int64_t delta = t - prev_t;
        prev_t = t;
        int code = labels[minute] ? kAnnApnea : kAnnNormal;
        if (delta > 1023) {
            auto d = static_cast<uint32_t>(delta);
            w.u16(static_cast<uint16_t>(kAnnSkip << 10));
            w.u16(static_cast<uint16_t>((d >> 16) & 0xFFFF));
            w.u16(static_cast<uint16_t>(d & 0xFFFF));
            delta = 0;
        }
        w.u16(static_cast<uint16_t>((code << 10) | (delta & 0x3FF)));
    }
    w.u16(0);  // end of stream
    return w.take();
}

EcgRecord load_record(const std::filesystem::path& dir, const std::string& record_id,
                      const LoadOptions& opts, size_t* dropped_labels) {
    namespace fs = std::filesystem;
    fs::path hea = dir / (record_id + ".hea");
    auto hea_bytes = read_file(hea);
    HeaderInfo hdr = parse_header(std::string(hea_bytes.begin(), hea_bytes.end()));

    double fs_d = hdr.fs;
    if (fs_d != std::floor(fs_d) || fs_d <= 0)
        throw std::runtime_error(record_id + ": non-integer sampling rate " + std::to_string(fs_d));

    EcgRecord rec;
    rec.record_id = record_id;
    rec.fs = static_cast<int>(fs_d);
    rec.samples = decode_samples(read_file(dir / hdr.signals[0].file_name), hdr);

    fs::path apn = dir / (record_id + ".apn");
    if (fs::exists(apn)) {
        rec.labels = parse_apnea_annotations(read_file(apn));
    } else if (opts.require_annotations) {
        throw std::runtime_error(record_id + ": missing annotation file " + apn.string());
    }

    // Drop labels whose minute starts at or beyond the signal end.
    size_t max_minutes = rec.samples.size() / (static_cast<size_t>(rec.fs) * 60) +
                         (rec.samples.size() % (static_cast<size_t>(rec.fs) * 60) ? 1 : 0);
    size_t dropped = 0;
    if (rec.labels.size() > max_minutes) {
        dropped = rec.labels.size() - max_minutes;
        rec.labels.resize(max_minutes);
    }
    if (dropped_labels) *dropped_labels = dropped;
    return rec;
}

void write_record(const std::filesystem::path& dir, const EcgRecord& rec, int fmt, double gain) {
    if (rec.fs <= 0) throw std::invalid_argument("record fs must be positive");
    std::filesystem::create_directories(dir);

    std::vector<int32_t> counts(rec.samples.size());
    int32_t lo = fmt == 212 ? -2048 : -32768;
    int32_t hi = fmt == 212 ? 2047 : 32767;
    for (size_t i = 0; i < rec.samples.size(); ++i) {
        auto c = static_cast<int32_t>(std::llround(rec.samples[i] * gain));
        counts[i] = std::clamp(c, lo, hi);
    }

    HeaderInfo hdr;
    hdr.record_name = rec.record_id;
    hdr.n_sig = 1;
    hdr.fs = rec.fs;
    hdr.n_samples = rec.samples.size();
    SignalInfo sig;
    sig.file_name = rec.record_id + ".dat";
    sig.fmt = fmt;
    sig.gain = gain;
    sig.description = "ECG";
    hdr.signals.push_back(sig);

    std::string hea = format_header(hdr);
    write_file_atomic(dir / (rec.record_id + ".hea"),
                      std::vector<uint8_t>(hea.begin(), hea.end()));
    write_file_atomic(dir / (rec.record_id + ".dat"), encode_counts(counts, fmt));
    if (!rec.labels.empty())
        write_file_atomic(dir / (rec.record_id + ".apn"),
                          write_apnea_annotations(rec.labels, rec.fs));
}

std::vector<std::string> list_record_ids(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> ids;
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".hea")
            ids.push_back(e.path().stem().string());
    std::sort(ids.begin(), ids.end());
    return ids;
}

}  // namespace apnea
