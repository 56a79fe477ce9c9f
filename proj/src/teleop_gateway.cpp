#include "sirius/teleop_gateway.hpp"

#include <spdlog/spdlog.h>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <cmath>
#include <deque>
#include <map>
#include <thread>

#include "json.hpp"
#include "sirius/errors.hpp"

namespace sirius {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

nlohmann::ordered_json vec_json(Vec2 v) { return nlohmann::ordered_json::array({v.x, v.y}); }

Vec2 vec_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ProtocolError("expected a two-element numeric array");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

std::string_view owner_name(Owner o) { return o == Owner::human ? "human" : "robot"; }

nlohmann::json parse_object(std::string_view text) {
  nlohmann::json j = nlohmann::json::parse(text.begin(), text.end(), nullptr, false);
  if (j.is_discarded()) throw ProtocolError("message is not valid JSON");
  if (!j.is_object()) throw ProtocolError("message is not a JSON object");
  const auto v = j.find("v");
  if (v == j.end() || !v->is_number_integer() || v->get<std::int64_t>() != kProtocolVersion) {
    throw ProtocolError("missing or unsupported protocol version");
  }
  const auto type = j.find("type");
  if (type == j.end() || !type->is_string()) throw ProtocolError("missing message type");
  return j;
}

}  // namespace

std::string encode_frame(const Frame& f) {
  nlohmann::ordered_json j;
  j["v"] = kProtocolVersion;
  j["type"] = "frame";
  j["episode"] = f.episode;
  j["t"] = f.t;
  j["agent"] = vec_json(f.agent);
  j["object"] = vec_json(f.object);
  j["carried"] = f.carried;
  j["goal"] = vec_json(f.goal);
  j["owner"] = owner_name(f.owner);
  j["advisory"] = f.advisory;
  return j.dump();
}

Frame decode_frame(std::string_view text) {
  const nlohmann::json j = parse_object(text);
  if (j.at("type") != "frame") throw ProtocolError("not a frame");
  try {
    Frame f;
    f.episode = j.at("episode").get<std::int64_t>();
    f.t = j.at("t").get<int>();
    f.agent = vec_from(j.at("agent"));
    f.object = vec_from(j.at("object"));
    f.carried = j.at("carried").get<bool>();
    f.goal = vec_from(j.at("goal"));
    const auto owner = j.at("owner").get<std::string>();
    if (owner != "robot" && owner != "human") throw ProtocolError("unknown owner '" + owner + "'");
    f.owner = owner == "human" ? Owner::human : Owner::robot;
    f.advisory = j.at("advisory").get<bool>();
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed frame: ") + e.what());
  }
}

std::string_view to_string(CommandKind kind) {
  switch (kind) {
    case CommandKind::intervene_start: return "intervene_start";
    case CommandKind::action: return "action";
    case CommandKind::intervene_end: return "intervene_end";
    case CommandKind::pause: return "pause";
    case CommandKind::resume: return "resume";
  }
  return "action";
}

std::string encode_command(const Command& c) {
  nlohmann::ordered_json j;
  j["v"] = kProtocolVersion;
  j["type"] = to_string(c.kind);
  if (c.kind == CommandKind::action) {
    const EnvAction a = c.action.value_or(EnvAction{{0.0, 0.0}, 0.0});
    j["dxdy"] = vec_json(a.dxdy);
    j["grip"] = a.grip;
  }
  return j.dump();
}

Command decode_command(std::string_view text) {
  const nlohmann::json j = parse_object(text);
  const auto type = j.at("type").get<std::string>();
  Command c;
  bool known = false;
  for (auto k : {CommandKind::intervene_start, CommandKind::action, CommandKind::intervene_end, CommandKind::pause,
                 CommandKind::resume}) {
    if (type == to_string(k)) {
      c.kind = k;
      known = true;
    }
  }
  if (!known) throw ProtocolError("unknown command type '" + type + "'");
  const bool has_fields = j.contains("dxdy") || j.contains("grip");
  if (c.kind != CommandKind::action) {
    if (has_fields) throw ProtocolError("action fields on a '" + type + "' command");
    return c;
  }
  const auto grip = j.find("grip");
  if (!j.contains("dxdy") || grip == j.end() || !grip->is_number()) {
    throw ProtocolError("action command needs dxdy and grip");
  }
  c.action = EnvAction{vec_from(j.at("dxdy")), grip->get<double>()}.clamped();
  return c;
}

void TeleopSession::attach(std::uint64_t client) {
  std::lock_guard lock(mutex_);
  if (!controller_) controller_ = client;
  changed_.notify_all();
}

void TeleopSession::detach(std::uint64_t client) {
  std::lock_guard lock(mutex_);
  if (controller_ != client) return;
  controller_.reset();
  if (human_) {
    spdlog::warn("controlling client disconnected during an intervention; pausing");
    human_ = false;
    latest_.reset();
    paused_ = true;
  }
  changed_.notify_all();
}

void TeleopSession::submit(std::uint64_t client, const Command& command) {
  std::lock_guard lock(mutex_);
  if (controller_ != client) return;
  switch (command.kind) {
    case CommandKind::intervene_start:
      human_ = true;
      latest_.reset();
      break;
    case CommandKind::action:
      if (human_) latest_ = command.action;
      break;
    case CommandKind::intervene_end:
      human_ = false;
      latest_.reset();
      break;
    case CommandKind::pause: paused_ = true; break;
    case CommandKind::resume: paused_ = false; break;
  }
  changed_.notify_all();
}

bool TeleopSession::has_controller() const {
  std::lock_guard lock(mutex_);
  return controller_.has_value();
}

std::optional<std::uint64_t> TeleopSession::controller() const {
  std::lock_guard lock(mutex_);
  return controller_;
}

bool TeleopSession::paused() const {
  std::lock_guard lock(mutex_);
  return paused_;
}

bool TeleopSession::human_active() const {
  std::lock_guard lock(mutex_);
  return human_;
}

bool TeleopSession::wait_for_controller(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  changed_.wait_for(lock, timeout, [&] { return closed_ || controller_.has_value(); });
  return !closed_ && controller_.has_value();
}

TeleopSession::TickInput TeleopSession::next_tick(bool carried) {
  std::unique_lock lock(mutex_);
  changed_.wait(lock, [&] { return closed_ || !paused_; });
  if (closed_) throw SessionClosed("teleop session closed");
  TickInput in;
  in.human = human_;
  if (human_) in.action = latest_.value_or(EnvAction{{0.0, 0.0}, carried ? 1.0 : -1.0});
  return in;
}

void TeleopSession::set_frame_sink(FrameSink sink) {
  std::lock_guard lock(mutex_);
  sink_ = std::move(sink);
}

void TeleopSession::broadcast(const Frame& frame) {
  FrameSink sink;
  {
    std::lock_guard lock(mutex_);
    sink = sink_;
  }
  if (sink) sink(encode_frame(frame));
}

void TeleopSession::close() {
  std::lock_guard lock(mutex_);
  closed_ = true;
  changed_.notify_all();
}

bool TeleopSession::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

LiveIntervenor::LiveIntervenor(std::shared_ptr<TeleopSession> session, TaskConfig task, InterventionModel model,
                               int tick_hz)
    : session_(std::move(session)),
      task_(std::move(task)),
      model_(model),
      tick_hz_(tick_hz),
      history_(model.stall_window) {
  if (tick_hz_ < 0) throw ConfigError("tick_hz must be >= 0");
}

void LiveIntervenor::begin_episode(const EnvState& initial, std::int64_t, int) {
  if (!session_->has_controller()) throw Error("live mode needs a connected client before an episode starts");
  history_.reset(initial);
  ++episode_;
  next_tick_ = std::chrono::steady_clock::now();
}

Arbitration LiveIntervenor::decide(const EnvState& state, const EnvAction& robot_action) {
  if (tick_hz_ > 0) {
    std::this_thread::sleep_until(next_tick_);
    next_tick_ += std::chrono::microseconds(1'000'000 / tick_hz_);
  }
  const TeleopSession::TickInput in = session_->next_tick(state.carried);
  if (tick_hz_ > 0) next_tick_ = std::max(next_tick_, std::chrono::steady_clock::now());
  ControlOwner probe;
  const bool advisory = monitor(history_.states(), probe, task_, model_);

  Arbitration arb;
  if (in.human) {
    arb.owner.owner = Owner::human;
    arb.action = in.action.clamped();
    arb.label = ClassLabel::intv;
  } else {
    arb.action = robot_action.clamped();
    arb.label = ClassLabel::robot;
  }
  session_->broadcast(
      {episode_, state.t, state.agent, state.object, state.carried, state.goal, arb.owner.owner, advisory});
  return arb;
}

void LiveIntervenor::observe(const StepResult& result) { history_.push(result.state); }

struct TeleopGateway::Impl {
  class WsConnection;

  std::shared_ptr<TeleopSession> session;
  net::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::thread thread;
  std::uint64_t next_id = 1;
  std::map<std::uint64_t, std::weak_ptr<WsConnection>> connections;

  class WsConnection : public std::enable_shared_from_this<WsConnection> {
   public:
    WsConnection(Impl& owner, tcp::socket socket, std::uint64_t id)
        : owner_(owner), ws_(std::move(socket)), id_(id) {}

    void start(http::request<http::string_body> req) {
      ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
      ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
        if (ec) return;
        self->owner_.connections[self->id_] = self;
        self->owner_.session->attach(self->id_);
        self->read();
      });
    }

    void send(std::shared_ptr<const std::string> msg) {
      if (closing_) return;
      queue_.push_back(std::move(msg));
      if (queue_.size() == 1) write_next();
    }

   private:
    void read() {
      ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
        if (ec) return self->finish();
        const std::string text = beast::buffers_to_string(self->buffer_.data());
        self->buffer_.consume(self->buffer_.size());
        try {
          self->owner_.session->submit(self->id_, decode_command(text));
        } catch (const ProtocolError& e) {
          spdlog::warn("client {}: {}", self->id_, e.what());
          self->close_with(websocket::close_code::unknown_data);
          return;
        }
        self->read();
      });
    }

    void write_next() {
      ws_.text(true);
      ws_.async_write(net::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
        if (ec) return self->finish();
        self->queue_.pop_front();
        if (!self->queue_.empty()) self->write_next();
      });
    }

    void close_with(websocket::close_code code) {
      closing_ = true;
      queue_.clear();
      owner_.session->detach(id_);
      ws_.async_close(websocket::close_reason(code),
                      [self = shared_from_this()](beast::error_code) { self->finish(); });
    }

    void finish() {
      owner_.connections.erase(id_);
      owner_.session->detach(id_);
    }

    Impl& owner_;
    websocket::stream<beast::tcp_stream> ws_;
    std::uint64_t id_;
    beast::flat_buffer buffer_;
    std::deque<std::shared_ptr<const std::string>> queue_;
    bool closing_ = false;
  };

  class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
   public:
    HttpConnection(Impl& owner, tcp::socket socket) : owner_(owner), stream_(std::move(socket)) {}

    void start() {
      stream_.expires_after(std::chrono::seconds(30));
      http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
        if (ec) return;
        self->dispatch();
      });
    }

   private:
    void dispatch() {
      if (websocket::is_upgrade(req_)) {
        stream_.expires_never();
        auto ws = std::make_shared<WsConnection>(owner_, stream_.release_socket(), owner_.next_id++);
        ws->start(std::move(req_));
        return;
      }
      auto res = std::make_shared<http::response<http::string_body>>();
      res->version(req_.version());
      res->keep_alive(false);
      if (req_.method() == http::verb::get && req_.target() == "/health") {
        res->result(http::status::ok);
        res->set(http::field::content_type, "application/json");
        res->body() = nlohmann::json{{"version", std::string(kGatewayVersion)}}.dump();
      } else {
        res->result(http::status::not_found);
        res->set(http::field::content_type, "text/plain");
        res->body() = "not found\n";
      }
      res->prepare_payload();
      http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
      });
    }

    Impl& owner_;
    beast::tcp_stream stream_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
  };

  void accept() {
    acceptor.async_accept(ioc, [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<HttpConnection>(*this, std::move(socket))->start();
      accept();
    });
  }

  void broadcast(const std::string& text) {
    auto msg = std::make_shared<const std::string>(text);
    net::post(ioc, [this, msg] {
      for (auto& [id, weak] : connections) {
        if (auto c = weak.lock()) c->send(msg);
      }
    });
  }
};

TeleopGateway::TeleopGateway(std::shared_ptr<TeleopSession> session, const GatewayOptions& options)
    : impl_(std::make_unique<Impl>()) {
  impl_->session = std::move(session);
  try {
    const tcp::endpoint endpoint(net::ip::make_address(options.address), options.port);
    impl_->acceptor.open(endpoint.protocol());
    impl_->acceptor.set_option(net::socket_base::reuse_address(true));
    impl_->acceptor.bind(endpoint);
    impl_->acceptor.listen();
  } catch (const boost::system::system_error& e) {
    throw Error("cannot listen on " + options.address + ":" + std::to_string(options.port) + ": " + e.what());
  }
  impl_->session->set_frame_sink([impl = impl_.get()](const std::string& text) { impl->broadcast(text); });
  impl_->accept();
  impl_->thread = std::thread([impl = impl_.get()] { impl->ioc.run(); });
}

TeleopGateway::~TeleopGateway() { stop(); }

unsigned short TeleopGateway::port() const { return impl_->acceptor.local_endpoint().port(); }

void TeleopGateway::stop() {
  if (!impl_ || !impl_->thread.joinable()) return;
  impl_->session->set_frame_sink({});
  impl_->ioc.stop();
  impl_->thread.join();
}

void serve_run(const RunConfig& config, const GatewayOptions& options, const std::filesystem::path& out_dir) {
  config.validate();
  auto session = std::make_shared<TeleopSession>();
  TeleopGateway gateway(session, options);
  spdlog::info("teleop gateway listening on {}:{}", options.address, gateway.port());

  net::io_context signals_ctx;
  net::signal_set signals(signals_ctx, SIGINT, SIGTERM);
  signals.async_wait([&](const beast::error_code& ec, int) {
    if (!ec) {
      spdlog::info("shutting down");
      session->close();
    }
  });
  std::thread signal_thread([&] { signals_ctx.run(); });
  auto stop_signals = [&] {
    signals_ctx.stop();
    signal_thread.join();
  };

  try {
    spdlog::info("waiting for a controlling client");
    while (!session->wait_for_controller(std::chrono::milliseconds(500))) {
      if (session->closed()) {
        stop_signals();
        return;
      }
    }
    RunOptions run_options;
    run_options.out_dir = out_dir;
    run_options.intervenor = std::make_shared<LiveIntervenor>(session, config.task, config.oracle, options.tick_hz);
    run(config, run_options);
  } catch (const RoundAborted& e) {
    if (!session->closed()) {
      stop_signals();
      throw;
    }
    spdlog::info("session closed during round {}; completed rounds are on disk", e.round());
  }
  stop_signals();
}

}  // namespace sirius
