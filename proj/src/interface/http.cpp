#include <thread>

#include "aerograph/errors.hpp"
#include "aerograph/interface/service.hpp"
#include "httplib.h"

namespace aerograph {

struct HttpServer::Impl {
  explicit Impl(Service& s) : service(s) {
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
      ApiRequest api{req.method, req.path, {}, req.body};
      for (const auto& [key, value] : req.params) api.query.emplace(key, value);
      const ApiResponse out = service.handle(api);
      res.status = out.status;
      res.set_content(out.body, "application/json");
    };
    server.Get(".*", route);
    server.Post(".*", route);
  }

  Service& service;
  httplib::Server server;
  std::thread thread;
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw DataError("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::run(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw DataError("cannot serve on " + host + ":" + std::to_string(port));
}

void HttpServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace aerograph
