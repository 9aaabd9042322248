#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>

#include "bodem/detector.hpp"
#include "bodem/image_io.hpp"
#include "bodem/wire.hpp"

extern char** environ;

namespace bodem {

struct SubprocessDetector::Process {
  pid_t pid = -1;
  int to_child = -1;
  int from_child = -1;
  std::string buffer;  // bytes read past the last consumed newline
  long next_id = 0;
  std::mutex mu;

  ~Process() {
    if (to_child >= 0) ::close(to_child);
    if (from_child >= 0) ::close(from_child);
    if (pid > 0) {
      int status = 0;
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid, &status, WNOHANG) == pid) return;
        ::usleep(10000);
      }
      ::kill(pid, SIGTERM);
      ::waitpid(pid, &status, 0);
    }
  }
};

namespace {

[[noreturn]] void fail(DetectorErrorKind kind, const std::string& cmd, const std::string& why) {
  throw DetectorError(kind, "cmd:" + cmd + ": " + why);
}

}  // namespace

SubprocessDetector::SubprocessDetector(std::string command, AdapterOptions opts)
    : command_(std::move(command)), opts_(opts), proc_(std::make_unique<Process>()) {
  // A child that exits early must surface as an error, not kill us on write.
  ::signal(SIGPIPE, SIG_IGN);

  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0 || ::pipe2(out_pipe, O_CLOEXEC) != 0) {
    fail(DetectorErrorKind::transport, command_, std::strerror(errno));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

  const char* argv[] = {"/bin/sh", "-c", command_.c_str(), nullptr};
  const int rc = ::posix_spawn(&proc_->pid, "/bin/sh", &actions, nullptr,
                               const_cast<char* const*>(argv), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  proc_->to_child = in_pipe[1];
  proc_->from_child = out_pipe[0];
  if (rc != 0) {
    proc_->pid = -1;
    fail(DetectorErrorKind::transport, command_, std::strerror(rc));
  }
}

SubprocessDetector::~SubprocessDetector() = default;

std::vector<RawBox> SubprocessDetector::detect_raw(const Image& img) {
  std::lock_guard lock(proc_->mu);
  Process& p = *proc_;
  const long id = p.next_id++;
  const nlohmann::json request{{"id", id}, {"image_png_base64", wire::base64_encode(encode_png(img))}};
  const std::string line = request.dump() + "\n";

  for (std::size_t off = 0; off < line.size();) {
    const ssize_t n = ::write(p.to_child, line.data() + off, line.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(DetectorErrorKind::transport, command_, std::string("write: ") + std::strerror(errno));
    }
    off += std::size_t(n);
  }

  const auto deadline = std::chrono::steady_clock::now() + opts_.timeout;
  std::size_t newline;
  while ((newline = p.buffer.find('\n')) == std::string::npos) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) fail(DetectorErrorKind::timeout, command_, "no response in time");
    pollfd pfd{p.from_child, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, int(left.count()));
    if (ready < 0 && errno == EINTR) continue;
    if (ready == 0) fail(DetectorErrorKind::timeout, command_, "no response in time");
    char chunk[4096];
    const ssize_t n = ::read(p.from_child, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) fail(DetectorErrorKind::transport, command_, "detector process closed its output");
    p.buffer.append(chunk, std::size_t(n));
  }
  const std::string reply = p.buffer.substr(0, newline);
  p.buffer.erase(0, newline + 1);

  const auto json = nlohmann::json::parse(reply, nullptr, false);
  if (json.is_discarded() || !json.is_object()) {
    fail(DetectorErrorKind::malformed, command_, "response line is not a JSON object");
  }
  if (!json.contains("id") || !json["id"].is_number_integer() || json["id"].get<long>() != id) {
    fail(DetectorErrorKind::malformed, command_, "response id does not echo request id");
  }
  return wire::parse_boxes(json);
}

}  // namespace bodem
