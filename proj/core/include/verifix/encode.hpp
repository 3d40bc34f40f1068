#pragma once

#include "verifix/formula.hpp"
#include "verifix/program.hpp"
#include "verifix/trace.hpp"

#include <optional>
#include <string>
#include <vector>

namespace verifix {

/// Read-write consistency. Each read (and each write's overwritten value)
/// matches exactly one write to the same location, or the initial value.
Formula encode_rw(const Trace& tr);
/// Program order, spawn/join order and lock-section exclusion. A section still
/// open at the end of the trace is held until after every event of the trace.
Formula encode_sync(const Trace& tr);
/// Branch, deref and assert outcomes as recorded.
Formula encode_pc(const Trace& tr);
/// encode_rw & encode_pc & encode_sync.
Formula encode_trace(const Trace& tr);

/// Schedule from the order of the trace's critical events in the model, inputs from input variables.
ScheduleInput model_to_schedule_input(const Model& m, const Trace& tr);

/// One unserializable interleaving candidate.
/// Patterns 1-4 use events {p, r, c}: local p and c around remote r, all on v1.
/// Patterns 5-7 use events {i, j, k, l}: local i on v1 and l on v2, remote j on v1 and k on v2.
struct AvInstance {
    int pattern = 1;
    std::vector<std::size_t> events;  // event indices in role order
    std::string v1, v2;

    bool operator==(const AvInstance&) const = default;
};

std::vector<AvInstance> find_av_instances(const Trace& tr, const AtomicRegionSpec& spec);
std::string describe(const AvInstance& inst, const Trace& tr);

struct AvEncoding {
    /// Extra value variable holding the value of a location just before an event.
    struct Ghost {
        int var = -1;
        std::string location;
        std::size_t event = 0;
    };
    Formula phi_av;  // the serializable outcome; a violation is its negation
    std::vector<Ghost> ghosts;
    Node ghost_defs;  // read-write constraints that pin the ghosts
};

AvEncoding encode_av(const Trace& tr, const AvInstance& inst);
/// Trace formula and the negated serializability condition, over one table.
/// Deref and assert checks after the instance's first event are left out, so
/// a run that crashes on the unserializable values still counts.
Formula av_query(const Trace& tr, const AvInstance& inst);

/// The model a trace realises: order = position, values = concrete values.
Model concrete_model(const Trace& tr, const AvEncoding* enc = nullptr);
/// Whether the trace's own values violate the instance.
bool av_violated(const Trace& tr, const AvInstance& inst);

/// Same instance in another run of the same path, matched by thread, label, kind and occurrence.
std::optional<AvInstance> translate_instance(const AvInstance& inst, const Trace& from, const Trace& to);

const Event& event_at(const Trace& tr, std::size_t index);

} // namespace verifix
