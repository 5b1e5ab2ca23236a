#include "ino/dataset.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "ino/serialize.hpp"

namespace ino {

using nlohmann::json;

namespace {
constexpr int kFormatVersion = 1;
}

const PointCloud& Dataset::cloud_of(std::size_t i) const {
    if (!sample_clouds.empty()) {
        if (i >= sample_clouds.size() || !sample_clouds[i]) {
            throw std::runtime_error("Dataset: missing per-sample cloud " + std::to_string(i));
        }
        return *sample_clouds[i];
    }
    if (!cloud) throw std::runtime_error("Dataset: no cloud");
    return *cloud;
}

void Dataset::set_contiguous_splits(std::size_t n_train, std::size_t n_val, std::size_t n_test) {
    if (n_train + n_val + n_test != num_samples()) {
        throw std::invalid_argument("Dataset: split sizes do not sum to sample count");
    }
    train_idx.clear();
    val_idx.clear();
    test_idx.clear();
    std::size_t i = 0;
    for (std::size_t k = 0; k < n_train; ++k) train_idx.push_back(i++);
    for (std::size_t k = 0; k < n_val; ++k) val_idx.push_back(i++);
    for (std::size_t k = 0; k < n_test; ++k) test_idx.push_back(i++);
}

void Dataset::validate() const {
    if (f.size() != u.size()) throw std::runtime_error("Dataset: f/u sample counts differ");
    if (!sample_clouds.empty() && sample_clouds.size() != f.size()) {
        throw std::runtime_error("Dataset: per-sample cloud count differs from sample count");
    }
    const std::size_t df = layout.f_width(), du = layout.u_width();
    for (std::size_t i = 0; i < f.size(); ++i) {
        const PointCloud& c = cloud_of(i);
        const std::size_t m = c.num_nodes();
        if (f[i].ndim() != 2 || f[i].rows() != m || f[i].cols() != df) {
            throw std::runtime_error("Dataset: sample " + std::to_string(i) + " f shape " + f[i].shape_str() +
                                     " does not match cloud/layout");
        }
        if (u[i].size() != 0 && (u[i].ndim() != 2 || u[i].rows() != m || u[i].cols() != du)) {
            throw std::runtime_error("Dataset: sample " + std::to_string(i) + " u shape " + u[i].shape_str() +
                                     " does not match cloud/layout");
        }
    }
    std::set<std::size_t> seen;
    for (const auto* split : {&train_idx, &val_idx, &test_idx}) {
        for (std::size_t idx : *split) {
            if (idx >= f.size()) throw std::runtime_error("Dataset: split index out of range");
            if (!seen.insert(idx).second) throw std::runtime_error("Dataset: splits are not disjoint");
        }
    }
}

Archive cloud_to_archive(const PointCloud& cloud) {
    Archive a;
    a.push_back(ArchiveEntry::tensor("coords", cloud.coords));
    a.push_back(ArchiveEntry::tensor("quad_weights",
                                     Tensor({cloud.quad_weights.size()},
                                            std::vector<double>(cloud.quad_weights.begin(),
                                                                cloud.quad_weights.end()))));
    a.push_back(ArchiveEntry::ints("ref_edge", {static_cast<std::int64_t>(cloud.ref_edge[0]),
                                                static_cast<std::int64_t>(cloud.ref_edge[1])}));
    if (!cloud.region.empty()) {
        std::vector<std::int64_t> tags;
        tags.reserve(cloud.region.size());
        for (Region r : cloud.region) tags.push_back(static_cast<std::int64_t>(r));
        a.push_back(ArchiveEntry::ints("region", std::move(tags)));
    }
    if (cloud.grid) {
        a.push_back(ArchiveEntry::ints("grid_dims", {static_cast<std::int64_t>(cloud.grid->rows),
                                                     static_cast<std::int64_t>(cloud.grid->cols)}));
        a.push_back(ArchiveEntry::tensor(
            "grid_frame", Tensor({4}, {cloud.grid->x0, cloud.grid->y0, cloud.grid->dx, cloud.grid->dy})));
    }
    return a;
}

PointCloud cloud_from_archive(const Archive& archive) {
    PointCloud cloud;
    cloud.coords = archive_get(archive, "coords").to_tensor();
    const ArchiveEntry& w = archive_get(archive, "quad_weights");
    cloud.quad_weights = w.f64;
    const ArchiveEntry& ref = archive_get(archive, "ref_edge");
    if (ref.i64.size() != 2) throw std::runtime_error("cloud: malformed ref_edge");
    cloud.ref_edge = {static_cast<std::size_t>(ref.i64[0]), static_cast<std::size_t>(ref.i64[1])};
    if (const ArchiveEntry* region = archive_find(archive, "region")) {
        cloud.region.reserve(region->i64.size());
        for (std::int64_t t : region->i64) cloud.region.push_back(static_cast<Region>(t));
    }
    if (const ArchiveEntry* dims = archive_find(archive, "grid_dims")) {
        const ArchiveEntry& frame = archive_get(archive, "grid_frame");
        GridDesc d;
        d.rows = static_cast<std::size_t>(dims->i64.at(0));
        d.cols = static_cast<std::size_t>(dims->i64.at(1));
        d.x0 = frame.f64.at(0);
        d.y0 = frame.f64.at(1);
        d.dx = frame.f64.at(2);
        d.dy = frame.f64.at(3);
        cloud.grid = d;
    }
    cloud.validate();
    return cloud;
}

void dataset_write(const Dataset& ds, const std::filesystem::path& dir) {
    ds.validate();
    std::filesystem::create_directories(dir);

    json manifest;
    manifest["format_version"] = kFormatVersion;
    manifest["problem"] = ds.problem;
    manifest["layout"] = layout_to_json(ds.layout);
    manifest["num_samples"] = ds.num_samples();
    manifest["splits"] = json{{"train", ds.train_idx}, {"val", ds.val_idx}, {"test", ds.test_idx}};
    manifest["split_sizes"] =
        json{{"train", ds.train_idx.size()}, {"val", ds.val_idx.size()}, {"test", ds.test_idx.size()}};
    manifest["seed"] = ds.seed;
    manifest["per_sample_clouds"] = !ds.sample_clouds.empty();
    if (!ds.config_echo.empty()) {
        manifest["config"] = json::parse(ds.config_echo, nullptr, false);
        if (manifest["config"].is_discarded()) manifest["config"] = ds.config_echo;
    }
    if (ds.cloud || !ds.sample_clouds.empty()) {
        const PointCloud& c = ds.num_samples() ? ds.cloud_of(0) : *ds.cloud;
        json cd;
        cd["nodes"] = c.num_nodes();
        if (c.grid) {
            cd["kind"] = "grid";
            cd["rows"] = c.grid->rows;
            cd["cols"] = c.grid->cols;
        } else {
            cd["kind"] = "cloud";
        }
        manifest["cloud"] = cd;
    }

    std::ofstream os(dir / "manifest");
    if (!os) throw std::runtime_error("dataset_write: cannot write manifest in " + dir.string());
    os << manifest.dump(2) << "\n";

    if (ds.sample_clouds.empty()) {
        if (!ds.cloud) throw std::runtime_error("dataset_write: dataset has no cloud");
        write_archive(dir / "cloud.bin", cloud_to_archive(*ds.cloud));
    } else {
        for (std::size_t i = 0; i < ds.sample_clouds.size(); ++i) {
            write_archive(dir / ("cloud_" + std::to_string(i) + ".bin"), cloud_to_archive(ds.cloud_of(i)));
        }
    }
    for (std::size_t i = 0; i < ds.num_samples(); ++i) {
        write_array(dir / ("sample_" + std::to_string(i) + "_f.bin"), ds.f[i]);
        write_array(dir / ("sample_" + std::to_string(i) + "_u.bin"), ds.u[i]);
    }
}

Dataset dataset_read(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest");
    if (!is) throw std::runtime_error("dataset_read: missing manifest in " + dir.string());
    json manifest;
    try {
        manifest = json::parse(is);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("dataset_read: malformed manifest: " + std::string(e.what()));
    }

    const int version = manifest.at("format_version").get<int>();
    if (version != kFormatVersion) {
        throw std::runtime_error("dataset_read: unsupported format version " + std::to_string(version));
    }

    Dataset ds;
    ds.problem = manifest.at("problem").get<std::string>();
    ds.layout = layout_from_json(manifest.at("layout"));
    ds.seed = manifest.at("seed").get<std::uint64_t>();
    ds.train_idx = manifest.at("splits").at("train").get<std::vector<std::size_t>>();
    ds.val_idx = manifest.at("splits").at("val").get<std::vector<std::size_t>>();
    ds.test_idx = manifest.at("splits").at("test").get<std::vector<std::size_t>>();
    if (manifest.contains("config")) ds.config_echo = manifest.at("config").dump();

    const auto n = manifest.at("num_samples").get<std::size_t>();
    const bool per_sample = manifest.at("per_sample_clouds").get<bool>();
    if (per_sample) {
        for (std::size_t i = 0; i < n; ++i) {
            ds.sample_clouds.push_back(std::make_shared<PointCloud>(
                cloud_from_archive(read_archive(dir / ("cloud_" + std::to_string(i) + ".bin")))));
        }
        if (n) ds.cloud = ds.sample_clouds[0];
    } else {
        ds.cloud = std::make_shared<PointCloud>(cloud_from_archive(read_archive(dir / "cloud.bin")));
    }
    for (std::size_t i = 0; i < n; ++i) {
        ds.f.push_back(read_array(dir / ("sample_" + std::to_string(i) + "_f.bin")));
        ds.u.push_back(read_array(dir / ("sample_" + std::to_string(i) + "_u.bin")));
    }
    ds.validate();
    return ds;
}

}  // namespace ino
