#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <thread>

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include "vst3/codec.hpp"
#include "vst3/y4m.hpp"

namespace vst3 {

namespace {

std::string replace_all(std::string text, const std::string& token, const std::string& value) {
    size_t pos = 0;
    while ((pos = text.find(token, pos)) != std::string::npos) {
        text.replace(pos, token.size(), value);
        pos += value.size();
    }
    return text;
}

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "missing-output", path.string());
    return std::vector<uint8_t>((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
}

std::atomic<uint64_t> g_temp_counter{0};

} // namespace

void run_subprocess(const std::vector<std::string>& argv, double timeout_sec,
                    const std::filesystem::path& log_path) {
    require(!argv.empty(), "spawn-failure", "empty command");

    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (const std::string& a : argv)
        args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);

    // Pipe used only to report an exec failure back to the parent.
    int err_pipe[2];
    require(pipe2(err_pipe, O_CLOEXEC) == 0, "spawn-failure", "pipe2 failed");

    pid_t pid = fork();
    require(pid >= 0, "spawn-failure", "fork failed");
    if (pid == 0) {
        close(err_pipe[0]);
        if (!log_path.empty()) {
            int fd = open(log_path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
            if (fd >= 0) {
                dup2(fd, STDOUT_FILENO);
                dup2(fd, STDERR_FILENO);
                close(fd);
            }
        }
        execvp(args[0], args.data());
        int err = errno;
        ssize_t ignored = write(err_pipe[1], &err, sizeof(err));
        (void)ignored;
        _exit(127);
    }

    close(err_pipe[1]);
    int exec_errno = 0;
    ssize_t got = read(err_pipe[0], &exec_errno, sizeof(exec_errno));
    close(err_pipe[0]);
    if (got > 0) {
        waitpid(pid, nullptr, 0);
        fail("spawn-failure", argv[0] + ": " + std::strerror(exec_errno));
    }

    auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_sec);
    int status = 0;
    while (true) {
        pid_t r = waitpid(pid, &status, WNOHANG);
        if (r == pid)
            break;
        require(r == 0, "spawn-failure", "waitpid failed");
        if (std::chrono::steady_clock::now() >= deadline) {
            kill(pid, SIGKILL);
            waitpid(pid, &status, 0);
            fail("timeout", argv[0] + " exceeded " + std::to_string(timeout_sec) + "s");
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (WIFEXITED(status)) {
        int code = WEXITSTATUS(status);
        require(code == 0, "nonzero-exit", argv[0] + " exited with status " + std::to_string(code));
    } else {
        fail("nonzero-exit", argv[0] + " terminated by signal");
    }
}

ExternalCodec::ExternalCodec(ExternalCodecConfig config) : config_(std::move(config)) {
    require(!config_.encode_argv.empty(), "invalid-config", "empty encode command");
    require(!config_.decode_argv.empty(), "invalid-config", "empty decode command");
    if (config_.work_dir.empty())
        config_.work_dir = std::filesystem::temp_directory_path();
    std::filesystem::create_directories(config_.work_dir);
}

void ExternalCodec::set_format_hint(int width, int height, FrameRate fps) {
    hint_width_ = width;
    hint_height_ = height;
    hint_fps_ = fps;
}

std::filesystem::path ExternalCodec::fresh_work_path(const std::string& tag) {
    uint64_t n = g_temp_counter.fetch_add(1);
    return config_.work_dir /
           ("vst3_" + tag + "_" + std::to_string(getpid()) + "_" + std::to_string(n));
}

namespace {

std::vector<std::string> substitute(const std::vector<std::string>& argv,
                                    const std::filesystem::path& input,
                                    const std::filesystem::path& output, int qp, int width,
                                    int height, FrameRate fps) {
    std::vector<std::string> out;
    out.reserve(argv.size());
    for (const std::string& token : argv) {
        std::string t = token;
        t = replace_all(t, "{input}", input.string());
        t = replace_all(t, "{output}", output.string());
        t = replace_all(t, "{qp}", std::to_string(qp));
        t = replace_all(t, "{width}", std::to_string(width));
        t = replace_all(t, "{height}", std::to_string(height));
        t = replace_all(t, "{fps}", std::to_string(fps.num) + "/" + std::to_string(fps.den));
        out.push_back(std::move(t));
    }
    return out;
}

} // namespace

EncodeResult ExternalCodec::encode(const VideoSequence& seq, QpValue qp) {
    seq.validate();
    set_format_hint(seq.width(), seq.height(), seq.frame_rate);
    hint_qp_ = qp.value();

    std::filesystem::path input = fresh_work_path("enc_in");
    input += ".y4m";
    std::filesystem::path output = fresh_work_path("enc_out");
    output += ".bin";
    std::filesystem::path log = fresh_work_path("enc");
    log += ".log";

    write_y4m(seq, input);
    std::vector<std::string> argv = substitute(config_.encode_argv, input, output, qp.value(),
                                               seq.width(), seq.height(), seq.frame_rate);
    run_subprocess(argv, config_.timeout_sec, log);
    require(std::filesystem::exists(output), "missing-output", output.string());

    EncodeResult result;
    result.payload = read_file_bytes(output);
    result.bits = static_cast<uint64_t>(result.payload.size()) * 8;
    std::filesystem::remove(input);
    std::filesystem::remove(output);
    return result;
}

VideoSequence ExternalCodec::decode(const std::vector<uint8_t>& payload) {
    std::filesystem::path input = fresh_work_path("dec_in");
    input += ".bin";
    std::filesystem::path output = fresh_work_path("dec_out");
    output += ".y4m";
    std::filesystem::path log = fresh_work_path("dec");
    log += ".log";

    {
        std::ofstream out(input, std::ios::binary | std::ios::trunc);
        require(out.good(), "io-failure", "cannot write " + input.string());
        out.write(reinterpret_cast<const char*>(payload.data()),
                  static_cast<std::streamsize>(payload.size()));
    }
    std::vector<std::string> argv = substitute(config_.decode_argv, input, output, hint_qp_,
                                               hint_width_, hint_height_, hint_fps_);
    run_subprocess(argv, config_.timeout_sec, log);
    require(std::filesystem::exists(output), "missing-output", output.string());

    VideoSequence seq = read_y4m(output);
    std::filesystem::remove(input);
    std::filesystem::remove(output);
    return seq;
}

std::unique_ptr<HostCodec> make_external_codec(ExternalCodecConfig config) {
    return std::make_unique<ExternalCodec>(std::move(config));
}

} // namespace vst3
