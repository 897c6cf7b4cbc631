#include "pdg/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <thread>

#include "pdg/errors.hpp"
#include "pdg/quaternion.hpp"

#include <json.hpp>

namespace pdg {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double uniform_pm(std::uint64_t& state, double half_width) {
    const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
    return (2.0 * u - 1.0) * half_width;
}

constexpr double kDeg = M_PI / 180.0;

}  // namespace

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
    std::uint64_t s = master_seed ^ (0x517cc1b727220a95ULL * (index + 1));
    splitmix64(s);
    return splitmix64(s);
}

State sample_initial_state(const State& nominal, const PerturbationRanges& ranges,
                           std::uint64_t seed) {
    std::uint64_t rng = seed;
    State x = nominal;
    x.m = nominal.m + (ranges.dm != 0.0 ? uniform_pm(rng, ranges.dm) : 0.0);
    // fixed draw order: r.x r.y [r.z] v.x v.y v.z roll pitch [yaw] w.x w.y [w.z]
    for (int i = 0; i < 3; ++i) {
        if (ranges.dr(i) != 0.0) x.r(i) = nominal.r(i) + uniform_pm(rng, ranges.dr(i));
    }
    for (int i = 0; i < 3; ++i) {
        if (ranges.dv(i) != 0.0) x.v(i) = nominal.v(i) + uniform_pm(rng, ranges.dv(i));
    }
    Vec3 euler = Vec3::Zero();
    for (int i = 0; i < 3; ++i) {
        if (ranges.d_euler_deg(i) != 0.0) euler(i) = uniform_pm(rng, ranges.d_euler_deg(i)) * kDeg;
    }
    x.q = quat_normalized(quat_from_euler(euler));
    for (int i = 0; i < 3; ++i) {
        if (ranges.dw_deg(i) != 0.0) x.w(i) = nominal.w(i) + uniform_pm(rng, ranges.dw_deg(i)) * kDeg;
    }
    return x;
}

Dataset build_dataset(const GuidanceProblem& nominal, const PerturbationRanges& ranges,
                      const BuildDatasetOptions& opts, const ScpConfig& scp_cfg) {
    if (scp_cfg.criteria_mode != CriteriaMode::dataset) {
        throw InvalidInputError("build_dataset: SCP must run with the dataset criteria");
    }
    if (opts.count < 1) throw InvalidInputError("build_dataset: count must be positive");

    const int n = nominal.disc.n_nodes;
    std::vector<TrajectoryRecord> slots(opts.count);
    std::atomic<int> next{0};

    const auto worker = [&]() {
        for (;;) {
            const int idx = next.fetch_add(1);
            if (idx >= opts.count) return;
            TrajectoryRecord& rec = slots[idx];
            rec.id = static_cast<std::uint64_t>(idx);
            rec.seed = derive_seed(opts.master_seed, rec.id);
            GuidanceProblem prob = nominal;
            prob.bcs.x0 = sample_initial_state(nominal.bcs.x0, ranges, rec.seed);
            rec.x0 = prob.bcs.x0.pack();
            try {
                const auto init =
                    straight_line_init(prob.bcs, prob.bounds, n, scp_cfg.tf_guess);
                const ScpResult res = run_scp(prob, init, scp_cfg);
                rec.converged = res.converged;
                rec.iterations = static_cast<std::uint32_t>(res.iterations);
                if (res.converged) {
                    rec.tf = res.trajectory.tf;
                    rec.final_mass = res.final_mass;
                    rec.j_tr = res.log.back().j_tr;
                    rec.j_vc = res.log.back().j_vc;
                    rec.frames.reserve(n);
                    for (int k = 0; k < n; ++k) {
                        rec.frames.push_back(
                            make_frame(res.trajectory.xs[k], res.trajectory.us[k]));
                    }
                }
            } catch (const Error&) {
                rec.converged = false;
            }
        }
    };

    int jobs = opts.jobs > 0 ? opts.jobs
                             : static_cast<int>(std::thread::hardware_concurrency());
    jobs = std::max(1, std::min(jobs, opts.count));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    Dataset ds;
    ds.manifest.master_seed = opts.master_seed;
    ds.manifest.attempted = static_cast<std::uint64_t>(opts.count);
    ds.manifest.config_hash = opts.config_hash;
    ds.manifest.n_nodes = n;
    for (auto& rec : slots) {
        if (rec.converged) ds.records.push_back(std::move(rec));
    }
    ds.manifest.record_count = ds.records.size();
    ds.manifest.acceptance_rate =
        static_cast<double>(ds.records.size()) / static_cast<double>(opts.count);

    {
        std::vector<double> tfs;
        tfs.reserve(ds.records.size());
        for (const auto& r : ds.records) tfs.push_back(r.tf);
        if (!tfs.empty()) {
            std::sort(tfs.begin(), tfs.end());
            ds.manifest.median_tf = tfs[tfs.size() / 2];
        }
    }

    // seeded random train/test split over stored records
    const auto stored = static_cast<std::uint32_t>(ds.records.size());
    std::vector<std::uint32_t> perm(stored);
    for (std::uint32_t i = 0; i < stored; ++i) perm[i] = i;
    std::uint64_t rng = opts.master_seed ^ 0xd1ce5eedd15ea5e5ULL;
    for (std::uint32_t i = stored; i > 1; --i) {
        const auto j = static_cast<std::uint32_t>(splitmix64(rng) % i);
        std::swap(perm[i - 1], perm[j]);
    }
    const auto n_train = static_cast<std::uint32_t>(
        std::llround(opts.split_fraction * static_cast<double>(stored)));
    ds.manifest.train_idx.assign(perm.begin(), perm.begin() + std::min(n_train, stored));
    ds.manifest.test_idx.assign(perm.begin() + std::min(n_train, stored), perm.end());
    std::sort(ds.manifest.train_idx.begin(), ds.manifest.train_idx.end());
    std::sort(ds.manifest.test_idx.begin(), ds.manifest.test_idx.end());
    return ds;
}

namespace {

constexpr char kRecMagic[8] = {'P', 'D', 'G', 'D', 'S', 'E', 'T', '1'};

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& prefix) {
    // records
    {
        std::string bytes;
        bytes.append(kRecMagic, sizeof(kRecMagic));
        const auto put = [&bytes](const auto& v) {
            bytes.append(reinterpret_cast<const char*>(&v), sizeof(v));
        };
        put(static_cast<std::uint32_t>(1));  // version
        put(static_cast<std::uint32_t>(ds.manifest.n_nodes));
        put(static_cast<std::uint64_t>(ds.records.size()));
        for (const auto& r : ds.records) {
            put(r.id);
            put(r.seed);
            put(static_cast<std::uint8_t>(r.converged ? 1 : 0));
            put(r.iterations);
            put(r.tf);
            put(r.final_mass);
            put(r.j_tr);
            put(r.j_vc);
            for (int i = 0; i < kStateDim; ++i) put(r.x0(i));
            if (static_cast<int>(r.frames.size()) != ds.manifest.n_nodes) {
                throw IoError("save_dataset: record " + std::to_string(r.id) +
                              " has a bad frame count");
            }
            for (const auto& f : r.frames) {
                for (int i = 0; i < kFrameDim; ++i) put(f(i));
            }
        }
        const auto crc = static_cast<std::uint32_t>(
            crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
                  static_cast<uInt>(bytes.size())));
        put(crc);
        std::ofstream os(prefix.string() + ".records.bin", std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("save_dataset: cannot open records file");
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!os) throw IoError("save_dataset: records write failed");
    }
    // manifest
    {
        nlohmann::json j;
        j["record_count"] = ds.manifest.record_count;
        j["train_idx"] = ds.manifest.train_idx;
        j["test_idx"] = ds.manifest.test_idx;
        j["config_hash"] = ds.manifest.config_hash;
        j["master_seed"] = ds.manifest.master_seed;
        j["attempted"] = ds.manifest.attempted;
        j["acceptance_rate"] = ds.manifest.acceptance_rate;
        j["n_nodes"] = ds.manifest.n_nodes;
        j["median_tf_s"] = ds.manifest.median_tf;
        j["euler_convention"] = ds.manifest.euler_convention;
        std::ofstream os(prefix.string() + ".manifest.json", std::ios::trunc);
        if (!os) throw IoError("save_dataset: cannot open manifest");
        os << j.dump(2) << '\n';
    }
}

Dataset load_dataset(const std::filesystem::path& prefix) {
    Dataset ds;
    {
        std::ifstream is(prefix.string() + ".manifest.json");
        if (!is) throw IoError("load_dataset: missing manifest for " + prefix.string());
        nlohmann::json j;
        try {
            is >> j;
            ds.manifest.record_count = j.at("record_count").get<std::uint64_t>();
            ds.manifest.train_idx = j.at("train_idx").get<std::vector<std::uint32_t>>();
            ds.manifest.test_idx = j.at("test_idx").get<std::vector<std::uint32_t>>();
            ds.manifest.config_hash = j.at("config_hash").get<std::string>();
            ds.manifest.master_seed = j.at("master_seed").get<std::uint64_t>();
            ds.manifest.attempted = j.at("attempted").get<std::uint64_t>();
            ds.manifest.acceptance_rate = j.at("acceptance_rate").get<double>();
            ds.manifest.n_nodes = j.at("n_nodes").get<int>();
            ds.manifest.median_tf = j.at("median_tf_s").get<double>();
            ds.manifest.euler_convention = j.at("euler_convention").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw IoError(std::string("load_dataset: malformed manifest: ") + e.what());
        }
    }
    std::ifstream is(prefix.string() + ".records.bin", std::ios::binary);
    if (!is) throw IoError("load_dataset: missing records for " + prefix.string());
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (bytes.size() < sizeof(kRecMagic) + 20) throw IoError("load_dataset: records truncated");
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
              static_cast<uInt>(bytes.size() - 4)));
    if (crc != stored_crc) throw IoError("load_dataset: records checksum mismatch");
    if (std::memcmp(bytes.data(), kRecMagic, sizeof(kRecMagic)) != 0) {
        throw IoError("load_dataset: bad records magic");
    }
    std::size_t pos = sizeof(kRecMagic);
    const auto get = [&bytes, &pos](auto& v) {
        if (pos + sizeof(v) > bytes.size() - 4) throw IoError("load_dataset: records truncated");
        std::memcpy(&v, bytes.data() + pos, sizeof(v));
        pos += sizeof(v);
    };
    std::uint32_t version, n_nodes;
    std::uint64_t count;
    get(version);
    if (version != 1) {
        throw IoError("load_dataset: unsupported records version " + std::to_string(version));
    }
    get(n_nodes);
    get(count);
    if (static_cast<int>(n_nodes) != ds.manifest.n_nodes ||
        count != ds.manifest.record_count) {
        throw IoError("load_dataset: manifest and records disagree");
    }
    ds.records.resize(count);
    for (std::uint64_t r = 0; r < count; ++r) {
        TrajectoryRecord& rec = ds.records[r];
        std::uint8_t conv;
        get(rec.id);
        get(rec.seed);
        get(conv);
        rec.converged = conv != 0;
        get(rec.iterations);
        get(rec.tf);
        get(rec.final_mass);
        get(rec.j_tr);
        get(rec.j_vc);
        for (int i = 0; i < kStateDim; ++i) get(rec.x0(i));
        rec.frames.resize(n_nodes);
        for (auto& f : rec.frames) {
            for (int i = 0; i < kFrameDim; ++i) get(f(i));
        }
        if (!rec.converged) {
            throw IoError("load_dataset: record " + std::to_string(rec.id) +
                          " is not a converged trajectory");
        }
    }
    return ds;
}

void export_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("export_dataset_csv: cannot open " + path.string());
    os << "record_id,node,tf_s,m_kg,rx_m,ry_m,rz_m,vx_m_s,vy_m_s,vz_m_s,"
          "q0,q1,q2,q3,wx_rad_s,wy_rad_s,wz_rad_s,Tx_N,Ty_N,Tz_N\n";
    char buf[64];
    for (const auto& r : ds.records) {
        for (std::size_t k = 0; k < r.frames.size(); ++k) {
            os << r.id << ',' << k;
            std::snprintf(buf, sizeof(buf), ",%.17g", r.tf);
            os << buf;
            for (int i = 0; i < kFrameDim; ++i) {
                std::snprintf(buf, sizeof(buf), ",%.17g", r.frames[k](i));
                os << buf;
            }
            os << '\n';
        }
    }
}

std::vector<FramePair> frame_pairs(const Dataset& ds, const std::vector<std::uint32_t>& indices) {
    std::vector<FramePair> out;
    for (const auto idx : indices) {
        if (idx >= ds.records.size()) throw InvalidInputError("frame_pairs: index out of range");
        const auto& frames = ds.records[idx].frames;
        for (std::size_t k = 0; k + 1 < frames.size(); ++k) {
            out.push_back({frames[k], frames[k + 1]});
        }
    }
    return out;
}

}  // namespace pdg
