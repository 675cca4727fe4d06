#include "fpd/error.h"

namespace fpd {

const char* to_string(ParseErrorKind kind) {
    switch (kind) {
        case ParseErrorKind::BadMagic: return "bad magic";
        case ParseErrorKind::Truncated: return "truncated payload";
        case ParseErrorKind::BadMaxval: return "unsupported maxval";
        case ParseErrorKind::BadHeader: return "malformed header";
    }
    return "parse error";
}

const char* to_string(CheckpointErrorKind kind) {
    switch (kind) {
        case CheckpointErrorKind::BadMagic: return "bad checkpoint magic";
        case CheckpointErrorKind::UnsupportedVersion: return "unsupported checkpoint version";
        case CheckpointErrorKind::Truncated: return "truncated checkpoint";
        case CheckpointErrorKind::Malformed: return "malformed checkpoint";
        case CheckpointErrorKind::ArchitectureMismatch: return "architecture mismatch";
    }
    return "checkpoint error";
}

}  // namespace fpd
