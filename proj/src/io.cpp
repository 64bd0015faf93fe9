#include "occball/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "occball/errors.hpp"
#include "occball/rng.hpp"
#include "occball/sysid.hpp"

namespace fs = std::filesystem;

namespace occball {

std::string format_double(double value) {
    if (std::isnan(value)) {
        return "nan";
    }
    if (std::isinf(value)) {
        return value > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

std::string content_hash(const std::string& bytes) {
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << fnv1a(bytes);
    return out.str();
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("cannot write " + path.string());
    }
    out << text;
}

std::string file_hash(const fs::path& path) { return content_hash(read_text(path)); }

// ---------------------------------------------------------------------------
// JSON

Json to_json(const PhysicalParams& p) {
    return Json{{"cart_mass", p.cart_mass}, {"pole_mass", p.pole_mass}, {"pole_length", p.pole_length},
                {"gravity", p.gravity},     {"tau", p.tau},             {"fixation", p.fixation}};
}

PhysicalParams params_from_json(const Json& j) {
    PhysicalParams p;
    p.cart_mass = j.value("cart_mass", p.cart_mass);
    p.pole_mass = j.value("pole_mass", p.pole_mass);
    p.pole_length = j.value("pole_length", p.pole_length);
    p.gravity = j.value("gravity", p.gravity);
    p.tau = j.value("tau", p.tau);
    p.fixation = j.value("fixation", p.fixation);
    p.validate();
    return p;
}

Json to_json(const SensorSpec& s) {
    return Json{{"tier", to_string(s.tier)}, {"noise_frac", s.noise_frac}, {"z_range", s.z_range},
                {"sigma", s.sigma()}, {"rng_stream", s.rng_stream}};
}

Json to_json(const Mat& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(std::move(row));
    }
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

Mat mat_from_json(const Json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows) {
        throw InputError("matrix JSON: row count mismatch");
    }
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = data.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != cols) {
            throw InputError("matrix JSON: column count mismatch");
        }
        for (Eigen::Index k = 0; k < cols; ++k) {
            m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
        }
    }
    return m;
}

Json to_json(const StateSpaceModel& model) {
    return Json{{"A", to_json(model.A)}, {"B", to_json(model.B)}, {"C", to_json(model.C)},
                {"D", to_json(model.D)}, {"dt", model.dt}};
}

StateSpaceModel model_from_json(const Json& j) {
    StateSpaceModel m(mat_from_json(j.at("A")), mat_from_json(j.at("B")), mat_from_json(j.at("C")),
                      mat_from_json(j.at("D")), j.value("dt", 0.02));
    m.validate();
    return m;
}

// ---------------------------------------------------------------------------
// Trajectories

std::string trajectory_csv(const Trajectory& traj) {
    traj.validate();
    std::string out = traj.has_states() ? "t,h,h_dot,theta,theta_dot,u,y\n" : "t,u,y\n";
    for (std::size_t t = 0; t < traj.size(); ++t) {
        out += std::to_string(t);
        if (traj.has_states()) {
            const auto& s = traj.states[t];
            for (const double v : {s.h, s.h_dot, s.theta, s.theta_dot}) {
                out += ',' + format_double(v);
            }
        }
        out += ',' + format_double(traj.u[t]) + ',' + format_double(traj.y[t]) + '\n';
    }
    return out;
}

Trajectory parse_trajectory_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) {
        throw InputError("trajectory CSV: empty");
    }
    const bool states = line.find("theta") != std::string::npos;
    Trajectory traj;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<double> cols;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            cols.push_back(std::stod(cell));
        }
        if (cols.size() != (states ? 7U : 3U)) {
            throw InputError("trajectory CSV: wrong column count");
        }
        traj.u.push_back(cols[cols.size() - 2]);
        traj.y.push_back(cols.back());
        if (states) {
            traj.states.push_back(SimState{cols[1], cols[2], cols[3], cols[4]});
        }
    }
    traj.validate();
    return traj;
}

std::string dataset_hash(const std::vector<Trajectory>& data) {
    std::string all;
    for (const auto& t : data) {
        all += trajectory_csv(t);
    }
    return content_hash(all);
}

DatasetManifest write_dataset(const fs::path& dir, const std::vector<Trajectory>& data, std::uint64_t seed,
                              const PhysicalParams& params, const SensorSpec& sensor, long budget) {
    fs::create_directories(dir);
    DatasetManifest m;
    m.seed = seed;
    m.params = params;
    m.sensor = sensor;
    m.budget = budget;
    std::string all;
    for (std::size_t i = 0; i < data.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "traj_%05zu.csv", i);
        const auto csv = trajectory_csv(data[i]);
        write_text(dir / name, csv);
        all += csv;
        m.files.emplace_back(name);
    }
    m.hash = content_hash(all);
    Json j{{"seed", seed},
           {"params", to_json(params)},
           {"sensor", to_json(sensor)},
           {"budget", budget},
           {"samples", total_samples(data)},
           {"trajectories", data.size()},
           {"files", m.files},
           {"hash", m.hash}};
    write_text(dir / "manifest.json", j.dump(2) + "\n");
    return m;
}

std::vector<Trajectory> read_dataset(const fs::path& dir, DatasetManifest* manifest) {
    const auto j = Json::parse(read_text(dir / "manifest.json"));
    std::vector<Trajectory> data;
    for (const auto& f : j.at("files")) {
        data.push_back(parse_trajectory_csv(read_text(dir / f.get<std::string>())));
    }
    if (dataset_hash(data) != j.at("hash").get<std::string>()) {
        throw InputError("dataset " + dir.string() + ": hash mismatch");
    }
    if (manifest != nullptr) {
        manifest->seed = j.at("seed").get<std::uint64_t>();
        manifest->params = params_from_json(j.at("params"));
        manifest->sensor = SensorSpec::make(sensor_tier_from_string(j.at("sensor").at("tier").get<std::string>()),
                                            manifest->params.fixation);
        manifest->budget = j.at("budget").get<long>();
        manifest->files = j.at("files").get<std::vector<std::string>>();
        manifest->hash = j.at("hash").get<std::string>();
    }
    return data;
}

// ---------------------------------------------------------------------------
// Policy checkpoints

namespace {

const char* const kNetNames[] = {"actor", "critic1", "critic2", "target1", "target2"};

std::vector<Mlp*> nets(PolicyParams& p) { return {&p.actor, &p.critic1, &p.critic2, &p.target1, &p.target2}; }

}  // namespace

void save_policy(const fs::path& stem, const PolicyParams& params, const SacConfig& config) {
    static_assert(std::endian::native == std::endian::little, "checkpoint blobs are little-endian");
    PolicyParams copy = params;
    Json arch{{"format", "occball-sac-v1"},
              {"activation", "tanh"},
              {"history_len", config.history_len},
              {"action_limit", config.action_limit},
              {"alpha", config.alpha},
              {"log_std_range", {kLogStdMin, kLogStdMax}},
              {"layout", "row-major weights then bias, per layer"},
              {"networks", Json::array()}};
    std::string blob;
    std::size_t offset = 0;
    const auto all = nets(copy);
    for (std::size_t k = 0; k < all.size(); ++k) {
        const Vec flat = all[k]->flatten();
        arch["networks"].push_back(Json{{"name", kNetNames[k]},
                                        {"widths", all[k]->widths()},
                                        {"offset", offset},
                                        {"count", flat.size()}});
        blob.append(reinterpret_cast<const char*>(flat.data()), static_cast<std::size_t>(flat.size()) * sizeof(double));
        offset += static_cast<std::size_t>(flat.size());
    }
    arch["blob_hash"] = content_hash(blob);
    auto bin = stem;
    bin += ".bin";
    auto js = stem;
    js += ".json";
    write_text(bin, blob);
    write_text(js, arch.dump(2) + "\n");
}

PolicyParams load_policy(const fs::path& stem, SacConfig* config) {
    auto js = stem;
    js += ".json";
    auto bin = stem;
    bin += ".bin";
    const auto arch = Json::parse(read_text(js));
    const auto blob = read_text(bin);
    if (content_hash(blob) != arch.at("blob_hash").get<std::string>()) {
        throw InputError("policy checkpoint: weight blob hash mismatch");
    }
    PolicyParams p;
    const auto all = nets(p);
    const auto& list = arch.at("networks");
    if (list.size() != all.size()) {
        throw InputError("policy checkpoint: expected five networks");
    }
    for (std::size_t k = 0; k < all.size(); ++k) {
        const auto widths = list[k].at("widths").get<std::vector<int>>();
        if (widths.size() < 2) {
            throw InputError("policy checkpoint: bad widths");
        }
        *all[k] = Mlp(widths.front(), std::vector<int>(widths.begin() + 1, widths.end() - 1), widths.back());
        const auto offset = list[k].at("offset").get<std::size_t>();
        const auto count = list[k].at("count").get<std::size_t>();
        if (static_cast<Eigen::Index>(count) != all[k]->parameter_count() ||
            (offset + count) * sizeof(double) > blob.size()) {
            throw InputError("policy checkpoint: blob does not match the architecture");
        }
        Vec flat(static_cast<Eigen::Index>(count));
        std::memcpy(flat.data(), blob.data() + offset * sizeof(double), count * sizeof(double));
        all[k]->unflatten(flat);
    }
    if (config != nullptr) {
        config->history_len = arch.at("history_len").get<int>();
        config->action_limit = arch.at("action_limit").get<double>();
        config->alpha = arch.at("alpha").get<double>();
        const auto w = list[0].at("widths").get<std::vector<int>>();
        config->hidden_widths.assign(w.begin() + 1, w.end() - 1);
    }
    return p;
}

std::string learning_curve_csv(const std::vector<CurvePoint>& curve) {
    std::string out = "episode,reward,running_reward,steps_cumulative\n";
    for (const auto& c : curve) {
        out += std::to_string(c.episode) + ',' + format_double(c.reward) + ',' + format_double(c.running_reward) +
               ',' + std::to_string(c.steps_cumulative) + '\n';
    }
    return out;
}

}  // namespace occball
