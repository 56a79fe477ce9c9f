#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sirius/deployment_loop.hpp"
#include "sirius/env2d.hpp"
#include "sirius/oracle.hpp"

namespace sirius {

inline constexpr int kProtocolVersion = 1;
/// Web-socket close code sent when a client message cannot be decoded.
inline constexpr int kCloseUnsupportedData = 1003;
inline constexpr std::string_view kGatewayVersion = "0.1.0";

struct Frame {
  std::int64_t episode = 0;
  int t = 0;
  Vec2 agent;
  Vec2 object;
  bool carried = false;
  Vec2 goal;
  Owner owner = Owner::robot;
  /// The takeover monitor would raise an alarm on this state.
  bool advisory = false;

  bool operator==(const Frame&) const = default;
};

/// {"v":1,"type":"frame","episode":..,"t":..,"agent":[x,y],"object":[x,y],
///  "carried":..,"goal":[x,y],"owner":"robot"|"human","advisory":..}
std::string encode_frame(const Frame& frame);
/// Throws ProtocolError.
Frame decode_frame(std::string_view text);

enum class CommandKind { intervene_start, action, intervene_end, pause, resume };

std::string_view to_string(CommandKind kind);

struct Command {
  CommandKind kind = CommandKind::action;
  /// Present iff kind == action; clamped to [-1, 1] on decode.
  std::optional<EnvAction> action;

  bool operator==(const Command&) const = default;
};

std::string encode_command(const Command& command);
/// Validates "v" and "type", ignores unknown fields. Throws ProtocolError.
Command decode_command(std::string_view text);

/// Transport-independent state shared by the network side (commands in,
/// frames out) and the environment tick loop.
class TeleopSession {
 public:
  using FrameSink = std::function<void(const std::string&)>;

  /// Registers a connection; the first one without a current controller takes control.
  void attach(std::uint64_t client);
  /// Disconnecting the controller during human control ends the intervention and pauses.
  void detach(std::uint64_t client);
  /// Commands from clients other than the controller are ignored.
  void submit(std::uint64_t client, const Command& command);

  bool has_controller() const;
  std::optional<std::uint64_t> controller() const;
  bool paused() const;
  bool human_active() const;

  /// Blocks until a controller is attached or the session closes. Returns
  /// false on close or timeout.
  bool wait_for_controller(std::chrono::milliseconds timeout);

  struct TickInput {
    bool human = false;
    EnvAction action;
  };
  /// Blocks while paused; throws SessionClosed once closed. With no action
  /// received since intervene_start the held action is zero motion with the
  /// grip that keeps the current carry state.
  TickInput next_tick(bool carried);

  void set_frame_sink(FrameSink sink);
  void broadcast(const Frame& frame);

  void close();
  bool closed() const;

 private:
  mutable std::mutex mutex_;
  std::condition_variable changed_;
  std::optional<std::uint64_t> controller_;
  bool human_ = false;
  bool paused_ = false;
  bool closed_ = false;
  std::optional<EnvAction> latest_;
  FrameSink sink_;
};

/// Intervenor driven by a live operator through a TeleopSession. The
/// takeover monitor still runs and feeds the frame's advisory flag.
class LiveIntervenor final : public Intervenor {
 public:
  LiveIntervenor(std::shared_ptr<TeleopSession> session, TaskConfig task, InterventionModel model, int tick_hz = 8);

  void begin_episode(const EnvState& initial, std::int64_t episode_seed, int round) override;
  Arbitration decide(const EnvState& state, const EnvAction& robot_action) override;
  void observe(const StepResult& result) override;
  TrajectorySource source() const override { return TrajectorySource::live_human; }

 private:
  std::shared_ptr<TeleopSession> session_;
  TaskConfig task_;
  InterventionModel model_;
  int tick_hz_;
  StateHistory history_;
  std::int64_t episode_ = -1;
  std::chrono::steady_clock::time_point next_tick_;
};

struct GatewayOptions {
  std::string address = "127.0.0.1";
  /// 0 picks an ephemeral port.
  unsigned short port = 8765;
  int tick_hz = 8;
};

/// Web-socket endpoint ("/") plus GET /health on one port, served from a
/// background thread.
class TeleopGateway {
 public:
  /// Binds immediately; throws Error when the port is unavailable.
  TeleopGateway(std::shared_ptr<TeleopSession> session, const GatewayOptions& options);
  ~TeleopGateway();
  TeleopGateway(const TeleopGateway&) = delete;
  TeleopGateway& operator=(const TeleopGateway&) = delete;

  unsigned short port() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Live-operator run: binds the gateway, waits for a controlling client,
/// then runs the deployment-learning loop with a LiveIntervenor. SIGINT or
/// SIGTERM closes the session; data already written stays on disk.
void serve_run(const RunConfig& config, const GatewayOptions& options, const std::filesystem::path& out_dir);

}  // namespace sirius
