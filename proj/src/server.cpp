#include "scnav/server.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <deque>
#include <fstream>
#include <future>
#include <set>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

namespace scnav {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

class Connection;

}  // namespace

struct BridgeServer::Impl {
  Impl(TrialConfig config, ServerOptions opts)
      : options(std::move(opts)),
        session(std::move(config), options.seed),
        throttle(options.ui_rate),
        acceptor(ioc),
        timer(ioc) {}

  void accept();
  void schedule_tick();
  void on_tick();
  void broadcast();
  void write_record();

  ServerOptions options;
  BridgeSession session;
  StateThrottle throttle;
  asio::io_context ioc;
  tcp::acceptor acceptor;
  asio::steady_timer timer;
  std::set<std::shared_ptr<Connection>> connections;
  std::chrono::steady_clock::time_point epoch = std::chrono::steady_clock::now();
  std::chrono::steady_clock::time_point next_tick;
  std::thread thread;
  std::atomic<bool> alive{false};
  bool recorded = false;
  unsigned short bound_port = 0;
};

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, BridgeServer::Impl& server) : ws_(std::move(socket)), server_(server) {}

  void open() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return self->close();
      self->id_ = self->server_.session.connect();
      self->read();
    });
  }

  void send(std::string text) {
    if (closed_) return;
    queue_.push_back(std::move(text));
    if (queue_.size() == 1) write();
  }

  std::optional<BridgeSession::ClientId> id() const { return id_; }

  void shutdown() {
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      if (auto reply = self->server_.session.handle_message(*self->id_, text)) self->send(*reply);
      self->read();
    });
  }

  void write() {
    ws_.text(true);
    ws_.async_write(asio::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      self->queue_.pop_front();
      if (!self->queue_.empty()) self->write();
    });
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    queue_.clear();
    if (id_) server_.session.disconnect(*id_);
    server_.connections.erase(shared_from_this());
  }

  websocket::stream<beast::tcp_stream> ws_;
  BridgeServer::Impl& server_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  std::optional<BridgeSession::ClientId> id_;
  bool closed_ = false;
};

}  // namespace

void BridgeServer::Impl::accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;
    auto conn = std::make_shared<Connection>(std::move(socket), *this);
    connections.insert(conn);
    conn->open();
    accept();
  });
}

void BridgeServer::Impl::schedule_tick() {
  next_tick += std::chrono::microseconds(static_cast<long long>(session.config().dt * 1e6));
  timer.expires_at(next_tick);
  timer.async_wait([this](beast::error_code ec) {
    if (!ec) on_tick();
  });
}

void BridgeServer::Impl::on_tick() {
  session.step();
  if (session.metrics() && !recorded) write_record();
  if (session.status() == SessionStatus::Idle) recorded = false;
  broadcast();
  schedule_tick();
}

void BridgeServer::Impl::broadcast() {
  const double now = std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch).count();
  if (connections.empty() || !throttle.ready(now)) return;
  const StateSnapshot snap = session.snapshot();
  std::optional<std::string> plain;
  for (const auto& c : connections) {
    if (!c->id()) continue;
    if (session.needs_map(*c->id())) {
      c->send(encode_state(snap, &session.simulation().world().map()));
      session.mark_map_sent(*c->id());
    } else {
      if (!plain) plain = encode_state(snap);
      c->send(*plain);
    }
  }
}

void BridgeServer::Impl::write_record() {
  recorded = true;
  if (options.output_dir.empty()) return;
  std::filesystem::create_directories(options.output_dir);
  const std::string stem = "session_seed" + std::to_string(session.seed());
  session.trace().save((options.output_dir / (stem + ".trace")).string());
  std::ofstream out(options.output_dir / (stem + ".csv"));
  out << csv_header() << csv_row(session.config().hash(), *session.metrics());
  if (!session.replayable()) out << "# arbitration changed mid-run; trace replays under the final setting only\n";
}

BridgeServer::BridgeServer(TrialConfig config, ServerOptions options)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(options))) {}

BridgeServer::~BridgeServer() { stop(); }

void BridgeServer::start() {
  if (impl_->alive) throw StateError("server already started");
  beast::error_code ec;
  const auto address = asio::ip::make_address(impl_->options.address, ec);
  if (ec) throw ValidationError("bad listen address '" + impl_->options.address + "'");
  const tcp::endpoint endpoint{address, impl_->options.port};
  impl_->acceptor.open(endpoint.protocol(), ec);
  if (!ec) impl_->acceptor.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) impl_->acceptor.bind(endpoint, ec);
  if (!ec) impl_->acceptor.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) throw StateError("cannot listen on port " + std::to_string(impl_->options.port) + ": " + ec.message());
  impl_->bound_port = impl_->acceptor.local_endpoint().port();
  impl_->accept();
  impl_->next_tick = std::chrono::steady_clock::now();
  impl_->schedule_tick();
  impl_->alive = true;
  impl_->thread = std::thread([this] { impl_->ioc.run(); });
}

void BridgeServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void BridgeServer::stop() {
  if (!impl_ || !impl_->alive.exchange(false)) return;
  asio::post(impl_->ioc, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
    impl_->timer.cancel();
    for (const auto& c : std::set(impl_->connections)) c->shutdown();
    impl_->connections.clear();
    impl_->ioc.stop();
  });
  if (impl_->thread.joinable() && impl_->thread.get_id() != std::this_thread::get_id()) impl_->thread.join();
}

unsigned short BridgeServer::port() const { return impl_->bound_port; }

bool BridgeServer::running() const { return impl_->alive; }

void BridgeServer::with_session(const std::function<void(BridgeSession&)>& fn) {
  if (!impl_->alive) {
    fn(impl_->session);
    return;
  }
  std::promise<void> done;
  asio::post(impl_->ioc, [&] {
    try {
      fn(impl_->session);
      done.set_value();
    } catch (...) {
      done.set_exception(std::current_exception());
    }
  });
  done.get_future().get();
}

}  // namespace scnav
