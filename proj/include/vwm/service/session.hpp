#pragma once

// One live session per connection. The handler is transport-free: feed it
// client messages, send back what it returns, call disconnect() if the peer
// goes away. Inputs are folded through the same SpatialBar::step and logged in
// the same format as simulated sessions.

#include <filesystem>
#include <optional>
#include <vector>

#include "vwm/run_files.hpp"
#include "vwm/service/protocol.hpp"

namespace vwm::service {

struct ServiceConfig {
    StudyConfig study;
    std::filesystem::path run_dir;  // empty: keep logs in memory only
};

class SessionHandler {
public:
    SessionHandler(ServiceConfig cfg, int default_participant)
        : cfg_(std::move(cfg)), default_participant_(default_participant) {}

    /// Applies one client message and returns the replies in send order.
    std::vector<WireMessage> handle(const WireMessage& in) {
        std::vector<WireMessage> out;
        if (closed_) {
            out.push_back(error("session is closed", in.seq));
            return out;
        }
        if (last_client_seq_ && in.seq <= *last_client_seq_) {
            out.push_back(error("out-of-order seq " + std::to_string(in.seq) + " after " +
                                    std::to_string(*last_client_seq_),
                                in.seq));
            close();
            return out;
        }
        last_client_seq_ = in.seq;
        try {
            switch (in.type) {
                case MessageType::Hello: on_hello(in, out); break;
                case MessageType::InputEvent: on_input(in, out); break;
                default: throw ProtocolError("clients may only send hello and input_event, got " + std::string(to_string(in.type)));
            }
        } catch (const std::exception& e) {
            out.push_back(error(e.what(), in.seq));
            close();
        }
        return out;
    }

    /// Unreadable input from the transport: answers with an error and closes.
    WireMessage reject(const std::string& message) {
        auto m = error(message, std::nullopt);
        disconnect();
        return m;
    }

    /// Peer went away: the running trial is voided and logged as aborted.
    void disconnect() {
        if (!closed_) close();
    }

    bool closed() const { return closed_; }
    bool finished() const { return finished_; }
    const std::optional<SessionPlan>& plan() const { return plan_; }
    const std::vector<TrialRecord>& records() const { return records_; }
    const std::array<ConditionLog, 4>& logs() const { return logs_; }

private:
    WireMessage make(MessageType type, json payload) { return {type, ++server_seq_, std::move(payload)}; }

    WireMessage error(const std::string& message, std::optional<std::int64_t> ack) {
        return make(MessageType::Error, {{"message", message}, {"ack", ack ? json(*ack) : json(nullptr)}});
    }

    void on_hello(const WireMessage& in, std::vector<WireMessage>& out) {
        if (plan_) throw ProtocolError("duplicate hello");
        const auto& p = in.payload;
        if (!p.contains("protocol") || p["protocol"] != kProtocol)
            throw ProtocolError("unsupported protocol, expected " + std::string(kProtocol));
        int participant = default_participant_;
        if (p.contains("participant")) {
            if (!p["participant"].is_number_integer() || p["participant"].get<int>() < 0)
                throw ProtocolError("participant must be a non-negative integer");
            participant = p["participant"].get<int>();
        }
        if (p.contains("trials_per_condition")) {
            if (!p["trials_per_condition"].is_number_integer() || p["trials_per_condition"].get<int>() < 0)
                throw ProtocolError("trials_per_condition must be a non-negative integer");
            cfg_.study.trials_per_condition = p["trials_per_condition"].get<int>();
        }
        bar_.emplace(make_bar_for(cfg_.study, layout_seed_for(participant_seed(cfg_.study.seed, participant))));
        plan_ = plan_for(cfg_.study, participant, bar_->layout());
        for (std::size_t pos = 0; pos < 4; ++pos) {
            logs_[pos].participant = participant;
            logs_[pos].condition = plan_->order[pos];
            logs_[pos].layout_seed = plan_->layout_seed;
        }
        out.push_back(make(MessageType::Hello, {{"protocol", kProtocol}, {"participant", participant}}));
        json order = json::array();
        for (auto c : plan_->order) order.push_back(to_string(c));
        json trials = json::array();
        for (const auto& t : plan_->trials) trials.push_back(t.size());
        auto start = layout_payload(*bar_);
        start["participant"] = participant;
        start["order"] = order;
        start["trials_per_condition"] = trials;
        out.push_back(make(MessageType::SessionStart, std::move(start)));
        advance(out);
    }

    void on_input(const WireMessage& in, std::vector<WireMessage>& out) {
        if (!plan_) throw ProtocolError("input_event before hello");
        if (!current_) throw ProtocolError("no trial is running");
        const InputEvent ev = parse_input_event(in.payload);
        const auto& spec = plan_->trials[pos_][trial_];
        const Condition cond = plan_->order[pos_];
        auto result = bar_->step(state_, ev, cond, spec);
        state_ = std::move(result.state);
        current_->events.push_back(ev);
        out.push_back(make(MessageType::StateUpdate, state_payload(state_, in.seq, result.emissions)));
        if (state_.phase == Phase::Complete) {
            current_->complete = true;
            logs_[pos_].trials.push_back(std::move(*current_));
            current_.reset();
            records_.push_back(make_record(plan_->participant, cond, spec, state_));
            out.push_back(make(MessageType::TrialComplete, record_payload(records_.back())));
            ++trial_;
            advance(out);
        }
    }

    // Moves to the next trial (skipping empty conditions) or ends the session.
    void advance(std::vector<WireMessage>& out) {
        while (pos_ < 4 && trial_ >= plan_->trials[pos_].size()) {
            ++pos_;
            trial_ = 0;
            fresh_condition_ = true;
        }
        if (pos_ >= 4) {
            finished_ = true;
            flush();
            out.push_back(make(MessageType::SessionEnd,
                               {{"participant", plan_->participant}, {"records", records_.size()},
                                {"run_dir", cfg_.run_dir.string()}}));
            closed_ = true;
            return;
        }
        const auto& spec = plan_->trials[pos_][trial_];
        if (fresh_condition_) {
            state_ = bar_->initial_state(plan_->trials[pos_].front().start_window);
            fresh_condition_ = false;
        }
        state_ = bar_->begin_trial(state_);
        current_ = LoggedTrial{spec, state_.cursor, state_.gaze, {}, false, false};
        out.push_back(make(MessageType::TrialSpec,
                           trial_spec_payload(spec, plan_->order[pos_], static_cast<int>(pos_), bar_->scene())));
        out.push_back(make(MessageType::StateUpdate, state_payload(state_, std::nullopt)));
    }

    void close() {
        closed_ = true;
        if (current_) {
            current_->aborted = true;
            logs_[pos_].trials.push_back(std::move(*current_));
            current_.reset();
        }
        flush();
    }

    void flush() {
        if (plan_ && !cfg_.run_dir.empty()) write_condition_logs(cfg_.run_dir, logs_);
    }

    ServiceConfig cfg_;
    int default_participant_ = 0;
    std::optional<SpatialBar> bar_;
    std::optional<SessionPlan> plan_;
    std::array<ConditionLog, 4> logs_;
    std::vector<TrialRecord> records_;
    std::optional<LoggedTrial> current_;
    InteractionState state_;
    std::size_t pos_ = 0;
    std::size_t trial_ = 0;
    bool fresh_condition_ = true;
    std::optional<std::int64_t> last_client_seq_;
    std::int64_t server_seq_ = 0;
    bool closed_ = false;
    bool finished_ = false;
};

}  // namespace vwm::service
