#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "viti/video.hpp"

namespace viti {

namespace fs = std::filesystem;

// On-disk conventions:
//   video frames  - binary PPM (P6, 8-bit), zero-padded numbered files
//   masks / segs  - binary PGM (P5, 8-bit); masks use {0, 255} -> {0, 1}
//   raw tensors   - "VITITNSR" container: u32 version, u8 dtype (0 = f64),
//                   u8 range tag, u16 reserved, u32 rank, u64 dims[],
//                   little-endian payload

enum class RangeTag : uint8_t { pm1 = 0, unit = 1, binary = 2, unbounded = 3 };

namespace detail {

inline void skip_pnm_whitespace(std::istream& in) {
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            return;
        }
    }
}

inline int read_pnm_int(std::istream& in) {
    skip_pnm_whitespace(in);
    int v = 0;
    if (!(in >> v))
        throw IoError("malformed PNM header");
    return v;
}

}  // namespace detail

// ---- PPM frames ----

inline void write_ppm(const fs::path& path, const Tensor& frame) {
    if (frame.rank() != 3 || frame.dim(2) != 3)
        throw ContractError("write_ppm: expected [H,W,3]");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    int64_t H = frame.dim(0), W = frame.dim(1);
    out << "P6\n" << W << " " << H << "\n255\n";
    std::vector<unsigned char> row(static_cast<size_t>(W * 3));
    for (int64_t y = 0; y < H; ++y) {
        for (int64_t x = 0; x < W; ++x)
            for (int64_t c = 0; c < 3; ++c) {
                double v = (frame.at(y, x, c) + 1.0) * 127.5;  // [-1,1] -> [0,255]
                int q = static_cast<int>(llround(v));
                row[static_cast<size_t>(x * 3 + c)] =
                    static_cast<unsigned char>(std::clamp(q, 0, 255));
            }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
}

inline Tensor read_ppm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P6")
        throw IoError("not a binary PPM: " + path.string());
    int W = detail::read_pnm_int(in);
    int H = detail::read_pnm_int(in);
    int maxval = detail::read_pnm_int(in);
    if (maxval != 255)
        throw IoError("unsupported PPM maxval in " + path.string());
    in.get();  // single whitespace after header
    Tensor frame({H, W, 3});
    std::vector<unsigned char> buf(static_cast<size_t>(W) * 3);
    for (int y = 0; y < H; ++y) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!in)
            throw IoError("truncated PPM: " + path.string());
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c)
                frame.at(y, x, c) = static_cast<double>(buf[static_cast<size_t>(x * 3 + c)]) / 127.5 - 1.0;
    }
    return frame;
}

// ---- PGM single-channel maps ----

inline void write_pgm(const fs::path& path, const Tensor& map, bool as_mask) {
    if (map.rank() != 2 && !(map.rank() == 3 && map.dim(2) == 1))
        throw ContractError("write_pgm: expected [H,W] or [H,W,1]");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    int64_t H = map.dim(0), W = map.dim(1);
    out << "P5\n" << W << " " << H << "\n255\n";
    std::vector<unsigned char> row(static_cast<size_t>(W));
    for (int64_t y = 0; y < H; ++y) {
        for (int64_t x = 0; x < W; ++x) {
            double v = map.rank() == 2 ? map.at(y, x) : map.at(y, x, static_cast<int64_t>(0));
            int q = as_mask ? (v != 0.0 ? 255 : 0) : static_cast<int>(llround(v));
            row[static_cast<size_t>(x)] = static_cast<unsigned char>(std::clamp(q, 0, 255));
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
}

// values {0,255} map to {0,1}; anything else is a malformed mask
inline Tensor read_pgm(const fs::path& path, bool as_mask) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5")
        throw IoError("not a binary PGM: " + path.string());
    int W = detail::read_pnm_int(in);
    int H = detail::read_pnm_int(in);
    int maxval = detail::read_pnm_int(in);
    if (maxval != 255)
        throw IoError("unsupported PGM maxval in " + path.string());
    in.get();
    Tensor map({H, W, 1});
    std::vector<unsigned char> buf(static_cast<size_t>(W));
    for (int y = 0; y < H; ++y) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!in)
            throw IoError("truncated PGM: " + path.string());
        for (int x = 0; x < W; ++x) {
            unsigned char b = buf[static_cast<size_t>(x)];
            if (as_mask) {
                if (b != 0 && b != 255)
                    throw IoError("mask file has values other than {0,255}: " + path.string());
                map.at(y, x, 0) = b == 255 ? 1.0 : 0.0;
            } else {
                map.at(y, x, 0) = static_cast<double>(b);
            }
        }
    }
    return map;
}

// ---- raw tensor container ----

inline void write_raw_tensor(const fs::path& path, const Tensor& t, RangeTag range) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out.write("VITITNSR", 8);
    uint32_t version = 1;
    uint8_t dtype = 0, rtag = static_cast<uint8_t>(range);
    uint16_t reserved = 0;
    uint32_t rank = static_cast<uint32_t>(t.rank());
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&dtype), 1);
    out.write(reinterpret_cast<const char*>(&rtag), 1);
    out.write(reinterpret_cast<const char*>(&reserved), 2);
    out.write(reinterpret_cast<const char*>(&rank), 4);
    for (int64_t d : t.shape) {
        uint64_t dd = static_cast<uint64_t>(d);
        out.write(reinterpret_cast<const char*>(&dd), 8);
    }
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

inline Tensor read_raw_tensor(const fs::path& path, RangeTag* range_out = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "VITITNSR")
        throw IoError("not a raw tensor container: " + path.string());
    uint32_t version = 0, rank = 0;
    uint8_t dtype = 0, rtag = 0;
    uint16_t reserved = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&dtype), 1);
    in.read(reinterpret_cast<char*>(&rtag), 1);
    in.read(reinterpret_cast<char*>(&reserved), 2);
    in.read(reinterpret_cast<char*>(&rank), 4);
    if (version != 1 || dtype != 0)
        throw IoError("unsupported raw tensor container: " + path.string());
    std::vector<int64_t> shape(rank);
    for (uint32_t i = 0; i < rank; ++i) {
        uint64_t d = 0;
        in.read(reinterpret_cast<char*>(&d), 8);
        shape[i] = static_cast<int64_t>(d);
    }
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!in)
        throw IoError("truncated raw tensor container: " + path.string());
    if (range_out)
        *range_out = static_cast<RangeTag>(rtag);
    return t;
}

// ---- frame directories ----

inline std::vector<fs::path> numbered_files(const fs::path& dir, const std::string& ext) {
    if (!fs::is_directory(dir))
        throw IoError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ext)
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    return files;
}

inline void write_video_frames(const fs::path& dir, const Video& v) {
    fs::create_directories(dir);
    char name[32];
    for (int64_t f = 0; f < v.frames(); ++f) {
        std::snprintf(name, sizeof(name), "frame_%05d.ppm", static_cast<int>(f));
        Tensor frame({v.height(), v.width(), 3});
        std::copy_n(&v.data.data[static_cast<size_t>(f * frame.numel())], frame.numel(),
                    frame.data.begin());
        write_ppm(dir / name, frame);
    }
}

inline Video read_video_frames(const fs::path& dir) {
    auto files = numbered_files(dir, ".ppm");
    if (files.empty())
        throw IoError("no .ppm frames in " + dir.string());
    Tensor first = read_ppm(files[0]);
    int64_t H = first.dim(0), W = first.dim(1), N = static_cast<int64_t>(files.size());
    Tensor data({N, H, W, 3});
    std::copy_n(first.data.begin(), first.numel(), data.data.begin());
    for (int64_t f = 1; f < N; ++f) {
        Tensor frame = read_ppm(files[static_cast<size_t>(f)]);
        if (frame.dim(0) != H || frame.dim(1) != W)
            throw IoError("inconsistent frame sizes in " + dir.string());
        std::copy_n(frame.data.begin(), frame.numel(),
                    data.data.begin() + static_cast<int64_t>(f * frame.numel()));
    }
    return Video(std::move(data));
}

// video from either a frame directory or a raw tensor file
inline Video load_video(const fs::path& path) {
    if (fs::is_directory(path))
        return read_video_frames(path);
    Tensor t = read_raw_tensor(path);
    return Video(std::move(t));
}

inline void write_mask_frames(const fs::path& dir, const MaskVideo& m) {
    fs::create_directories(dir);
    char name[32];
    for (int64_t f = 0; f < m.frames(); ++f) {
        std::snprintf(name, sizeof(name), "frame_%05d.pgm", static_cast<int>(f));
        Tensor frame({m.height(), m.width(), 1});
        std::copy_n(&m.data.data[static_cast<size_t>(f * frame.numel())], frame.numel(),
                    frame.data.begin());
        write_pgm(dir / name, frame, /*as_mask=*/true);
    }
}

inline MaskVideo read_mask_frames(const fs::path& dir) {
    auto files = numbered_files(dir, ".pgm");
    if (files.empty())
        throw IoError("no .pgm frames in " + dir.string());
    Tensor first = read_pgm(files[0], /*as_mask=*/true);
    int64_t H = first.dim(0), W = first.dim(1), N = static_cast<int64_t>(files.size());
    Tensor data({N, H, W, 1});
    std::copy_n(first.data.begin(), first.numel(), data.data.begin());
    for (int64_t f = 1; f < N; ++f) {
        Tensor frame = read_pgm(files[static_cast<size_t>(f)], true);
        if (frame.dim(0) != H || frame.dim(1) != W)
            throw IoError("inconsistent mask sizes in " + dir.string());
        std::copy_n(frame.data.begin(), frame.numel(),
                    data.data.begin() + static_cast<int64_t>(f * frame.numel()));
    }
    return MaskVideo(std::move(data));
}

inline MaskVideo load_mask(const fs::path& path) {
    if (fs::is_directory(path))
        return read_mask_frames(path);
    Tensor t = read_raw_tensor(path);
    return MaskVideo(std::move(t));
}

// label maps: same layout as masks but raw 0..255 values
inline Tensor read_seg_frames(const fs::path& dir) {
    auto files = numbered_files(dir, ".pgm");
    if (files.empty())
        throw IoError("no .pgm frames in " + dir.string());
    Tensor first = read_pgm(files[0], /*as_mask=*/false);
    int64_t H = first.dim(0), W = first.dim(1), N = static_cast<int64_t>(files.size());
    Tensor data({N, H, W, 1});
    std::copy_n(first.data.begin(), first.numel(), data.data.begin());
    for (int64_t f = 1; f < N; ++f) {
        Tensor frame = read_pgm(files[static_cast<size_t>(f)], false);
        std::copy_n(frame.data.begin(), frame.numel(),
                    data.data.begin() + static_cast<int64_t>(f * frame.numel()));
    }
    return data;
}

inline void write_seg_frames(const fs::path& dir, const Tensor& seg) {
    fs::create_directories(dir);
    char name[32];
    int64_t per = seg.dim(1) * seg.dim(2);
    for (int64_t f = 0; f < seg.dim(0); ++f) {
        std::snprintf(name, sizeof(name), "frame_%05d.pgm", static_cast<int>(f));
        Tensor frame({seg.dim(1), seg.dim(2), 1});
        std::copy_n(&seg.data[static_cast<size_t>(f * per)], per, frame.data.begin());
        write_pgm(dir / name, frame, /*as_mask=*/false);
    }
}

}  // namespace viti
