#pragma once

// Wire format "vwm/1": each message is a 4-byte big-endian length followed by
// that many bytes of UTF-8 JSON
//
//   {"type": "<type>", "seq": <int>, "payload": {...}}
//
// Field-by-field schema: docs/protocol.md.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "vwm/experiment.hpp"

namespace vwm::service {

using json = nlohmann::json;

inline constexpr std::string_view kProtocol = "vwm/1";
inline constexpr std::size_t kMaxFrameBytes = 1 << 20;

enum class MessageType { Hello, SessionStart, TrialSpec, InputEvent, StateUpdate, TrialComplete, SessionEnd, Error };

inline constexpr std::array<std::pair<MessageType, std::string_view>, 8> kMessageNames{{
    {MessageType::Hello, "hello"},
    {MessageType::SessionStart, "session_start"},
    {MessageType::TrialSpec, "trial_spec"},
    {MessageType::InputEvent, "input_event"},
    {MessageType::StateUpdate, "state_update"},
    {MessageType::TrialComplete, "trial_complete"},
    {MessageType::SessionEnd, "session_end"},
    {MessageType::Error, "error"},
}};

class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string_view to_string(MessageType t) {
    for (const auto& [type, name] : kMessageNames)
        if (type == t) return name;
    return "?";
}

inline MessageType parse_message_type(std::string_view s) {
    for (const auto& [type, name] : kMessageNames)
        if (name == s) return type;
    throw ProtocolError("unknown message type: " + std::string(s));
}

struct WireMessage {
    MessageType type = MessageType::Hello;
    std::int64_t seq = 0;
    json payload = json::object();

    friend bool operator==(const WireMessage&, const WireMessage&) = default;
};

inline std::string to_json_text(const WireMessage& m) {
    return json{{"type", to_string(m.type)}, {"seq", m.seq}, {"payload", m.payload}}.dump();
}

inline WireMessage from_json_text(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ProtocolError(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ProtocolError("message must be a JSON object");
    if (!j.contains("type") || !j["type"].is_string()) throw ProtocolError("message needs a string 'type'");
    if (!j.contains("seq") || !j["seq"].is_number_integer()) throw ProtocolError("message needs an integer 'seq'");
    WireMessage m;
    m.type = parse_message_type(j["type"].get<std::string>());
    m.seq = j["seq"].get<std::int64_t>();
    if (j.contains("payload")) {
        if (!j["payload"].is_object()) throw ProtocolError("'payload' must be an object");
        m.payload = j["payload"];
    }
    return m;
}

/// Length-prefixed frame for one message.
inline std::string encode_frame(const WireMessage& m) {
    const std::string body = to_json_text(m);
    if (body.size() > kMaxFrameBytes) throw ProtocolError("frame too large");
    const auto n = static_cast<std::uint32_t>(body.size());
    std::string out;
    out.reserve(4 + body.size());
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((n >> shift) & 0xff));
    out += body;
    return out;
}

inline std::uint32_t decode_length(const unsigned char (&prefix)[4]) {
    return (std::uint32_t{prefix[0]} << 24) | (std::uint32_t{prefix[1]} << 16) | (std::uint32_t{prefix[2]} << 8) |
           std::uint32_t{prefix[3]};
}

/// Incremental decoder for a byte stream of frames.
class FrameReader {
public:
    void feed(std::string_view bytes) { buffer_.append(bytes); }

    std::optional<WireMessage> next() {
        if (buffer_.size() < 4) return std::nullopt;
        unsigned char prefix[4];
        for (int i = 0; i < 4; ++i) prefix[i] = static_cast<unsigned char>(buffer_[static_cast<std::size_t>(i)]);
        const auto n = decode_length(prefix);
        if (n > kMaxFrameBytes) throw ProtocolError("frame too large: " + std::to_string(n) + " bytes");
        if (buffer_.size() < 4 + std::size_t{n}) return std::nullopt;
        auto m = from_json_text(std::string_view(buffer_).substr(4, n));
        buffer_.erase(0, 4 + std::size_t{n});
        return m;
    }

    std::size_t pending_bytes() const { return buffer_.size(); }

private:
    std::string buffer_;
};

// ---- payload codecs ----------------------------------------------------------

inline json to_json(PixelPoint p) { return {{"x", p.x}, {"y", p.y}}; }
inline json to_json(const Rect& r) { return {{"x0", r.x0}, {"y0", r.y0}, {"x1", r.x1}, {"y1", r.y1}}; }

inline json to_json(const Target& t) {
    json j{{"kind", to_string(t)}};
    if (t.kind == TargetKind::CategoryTile || t.kind == TargetKind::ThumbnailTile) j["color"] = to_string(t.color);
    if (t.window >= 0) j["window"] = window_name(t.window);
    return j;
}

inline json input_event_payload(const InputEvent& ev) {
    switch (ev.kind) {
        case InputKind::CursorDelta: return {{"kind", "move"}, {"t_ms", ev.t_ms}, {"dx", ev.x}, {"dy", ev.y}};
        case InputKind::GazePoint: return {{"kind", "gaze"}, {"t_ms", ev.t_ms}, {"x", ev.x}, {"y", ev.y}};
        case InputKind::Click: return {{"kind", "click"}, {"t_ms", ev.t_ms}};
    }
    return {};
}

inline InputEvent parse_input_event(const json& p) {
    const auto number = [&](const char* key) {
        if (!p.contains(key) || !p[key].is_number()) throw ProtocolError(std::string("input_event needs number '") + key + "'");
        return p[key].get<double>();
    };
    if (!p.contains("kind") || !p["kind"].is_string()) throw ProtocolError("input_event needs string 'kind'");
    const auto kind = p["kind"].get<std::string>();
    const double t = number("t_ms");
    if (kind == "move") return InputEvent::cursor_delta(t, number("dx"), number("dy"));
    if (kind == "gaze") return InputEvent::gaze_point(t, {number("x"), number("y")});
    if (kind == "click") return InputEvent::click(t);
    throw ProtocolError("unknown input kind: " + kind);
}

inline json layout_payload(const SpatialBar& bar) {
    json windows = json::array();
    for (const auto& w : bar.layout().windows)
        windows.push_back({{"id", w.id},
                           {"name", window_name(w.id)},
                           {"color", to_string(w.color)},
                           {"number", w.number},
                           {"ring", w.id >= 0 && bar.layout().ring(w.id) == Ring::Large ? "large" : "short"},
                           {"rect", to_json(w.rect())},
                           {"z", w.z_order}});
    const auto tiles = [](const BarModel& m) {
        json out = json::array();
        for (const auto& t : m.tiles) out.push_back({{"target", to_json(t.target)}, {"rect", to_json(t.rect)}});
        return out;
    };
    json bars{{"categories", tiles(bar.bar(std::nullopt))}};
    for (auto c : kColors) bars[std::string(to_string(c))] = tiles(bar.bar(c));
    return {{"display", {{"width_px", bar.display().width_px()}, {"height_px", bar.display().height_px()}}},
            {"layout_seed", bar.layout().seed},
            {"windows", windows},
            {"bar_center", to_json(bar.layout().bar_center)},
            {"bars", bars},
            {"sensitivity", bar.config().sensitivity},
            {"animation_ms", bar.config().animation_ms}};
}

inline json trial_spec_payload(const TrialSpec& t, Condition c, int position, const SceneConfig& scene) {
    return {{"condition", to_string(c)},
            {"position", position},
            {"index", t.index},
            {"start", window_name(t.start_window)},
            {"target", window_name(t.target_window)},
            {"prompt", {{"color", to_string(color_of(t.target_window))}, {"number", number_of(t.target_window)}}},
            {"pair", to_string(t.pair)},
            {"button", to_json(button_rect(t.button_center, scene))},
            {"training", t.training},
            {"discarded", t.discarded}};
}

inline json state_payload(const InteractionState& s, std::optional<std::int64_t> ack,
                          const std::vector<Emission>& emissions = {}) {
    json emitted = json::array();
    for (const auto& e : emissions)
        emitted.push_back({{"t_ms", e.t_ms}, {"kind", to_string(e.kind)}, {"target", to_json(e.target)}});
    json j{{"phase", to_string(s.phase)},
           {"cursor", to_json(s.cursor)},
           {"gaze", to_json(s.gaze)},
           {"highlight", to_json(s.highlight)},
           {"bar_level", s.open_color ? std::string(to_string(*s.open_color)) : "categories"},
           {"animation_remaining_ms", s.animation_remaining_ms(s.last_t)},
           {"z_order", s.z_order},
           {"errors", s.errors},
           {"emissions", emitted},
           {"ack", ack ? json(*ack) : json(nullptr)}};
    if (s.animation) j["animation"] = {{"from", to_json(s.animation->from)}, {"to", to_json(s.animation->to)},
                                       {"t_start", s.animation->t_start}, {"t_end", s.animation->t_end}};
    j["next_button"] = s.next_button ? json{{"window", window_name(s.next_button->window)},
                                            {"rect", to_json(s.next_button->rect)}}
                                     : json(nullptr);
    return j;
}

inline json record_payload(const TrialRecord& r) {
    return {{"participant", r.participant}, {"condition", to_string(r.condition)}, {"trial", r.trial},
            {"pair", to_string(r.pair)},    {"thumbnail_ms", r.thumbnail_ms},      {"button_ms", r.button_ms},
            {"total_ms", r.total_ms},       {"errors", r.errors},                  {"detours", r.detours},
            {"training", r.training},       {"discarded", r.discarded}};
}

}  // namespace vwm::service
