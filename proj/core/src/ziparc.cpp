#include "kga/ziparc.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include <zlib.h>

namespace kga {

namespace {

std::uint16_t rd16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t rd32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

void wr16(std::string& out, std::uint16_t v) {
    out += static_cast<char>(v & 0xFF);
    out += static_cast<char>((v >> 8) & 0xFF);
}

void wr32(std::string& out, std::uint32_t v) {
    out += static_cast<char>(v & 0xFF);
    out += static_cast<char>((v >> 8) & 0xFF);
    out += static_cast<char>((v >> 16) & 0xFF);
    out += static_cast<char>((v >> 24) & 0xFF);
}

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;

void check_entry_name(const std::string& name) {
    if (name.empty()) throw ZipError("archive entry with empty name");
    if (name.find('\\') != std::string::npos)
        throw ZipError("archive entry uses backslashes: " + name);
    if (name.front() == '/') throw ZipError("archive entry is absolute: " + name);
    std::size_t pos = 0;
    while (pos <= name.size()) {
        std::size_t next = name.find('/', pos);
        std::string part = name.substr(pos, next == std::string::npos ? next : next - pos);
        if (part == "..")
            throw ZipError("archive entry escapes its directory: " + name);
        if (next == std::string::npos) break;
        pos = next + 1;
    }
}

std::string inflate_raw(const unsigned char* data, std::size_t comp_size,
                        std::size_t uncomp_size, const std::string& name) {
    std::string out(uncomp_size, '\0');
    z_stream zs;
    std::memset(&zs, 0, sizeof(zs));
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK)
        throw ZipError("inflate init failed for " + name);
    zs.next_in = const_cast<unsigned char*>(data);
    zs.avail_in = static_cast<uInt>(comp_size);
    zs.next_out = reinterpret_cast<unsigned char*>(out.data());
    zs.avail_out = static_cast<uInt>(uncomp_size);
    int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || zs.total_out != uncomp_size)
        throw ZipError("corrupt deflate stream in " + name);
    return out;
}

} // namespace

std::vector<ZipEntry> read_zip(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ZipError("cannot open archive: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::size_t n = bytes.size();

    // End-of-central-directory record sits in the last 22..22+65535 bytes.
    if (n < 22) throw ZipError("not a ZIP archive: " + path);
    std::size_t eocd = std::string::npos;
    std::size_t scan_limit = n >= 22 + 65535 ? n - 22 - 65535 : 0;
    for (std::size_t i = n - 22 + 1; i-- > scan_limit;) {
        if (rd32(p + i) == kEndSig) {
            eocd = i;
            break;
        }
    }
    if (eocd == std::string::npos) throw ZipError("missing end record: " + path);
    std::uint16_t count = rd16(p + eocd + 10);
    std::uint32_t cd_size = rd32(p + eocd + 12);
    std::uint32_t cd_offset = rd32(p + eocd + 16);
    if (cd_offset + cd_size > n) throw ZipError("central directory out of range: " + path);

    std::vector<ZipEntry> entries;
    std::size_t pos = cd_offset;
    for (std::uint16_t i = 0; i < count; ++i) {
        if (pos + 46 > n || rd32(p + pos) != kCentralSig)
            throw ZipError("corrupt central directory: " + path);
        std::uint16_t method = rd16(p + pos + 10);
        std::uint32_t crc = rd32(p + pos + 16);
        std::uint32_t comp_size = rd32(p + pos + 20);
        std::uint32_t uncomp_size = rd32(p + pos + 24);
        std::uint16_t name_len = rd16(p + pos + 28);
        std::uint16_t extra_len = rd16(p + pos + 30);
        std::uint16_t comment_len = rd16(p + pos + 32);
        std::uint32_t local_offset = rd32(p + pos + 42);
        if (pos + 46 + name_len > n) throw ZipError("corrupt entry name: " + path);
        std::string name(bytes, pos + 46, name_len);
        check_entry_name(name);

        ZipEntry entry;
        entry.name = name;
        entry.is_dir = !name.empty() && name.back() == '/';
        if (!entry.is_dir) {
            if (local_offset + 30 > n || rd32(p + local_offset) != kLocalSig)
                throw ZipError("corrupt local header for " + name);
            std::uint16_t lname = rd16(p + local_offset + 26);
            std::uint16_t lextra = rd16(p + local_offset + 28);
            std::size_t data_at = local_offset + 30 + lname + lextra;
            if (data_at + comp_size > n)
                throw ZipError("entry data out of range for " + name);
            if (method == 0) {
                if (comp_size != uncomp_size)
                    throw ZipError("stored entry with mismatched sizes: " + name);
                entry.content.assign(bytes, data_at, comp_size);
            } else if (method == 8) {
                entry.content = inflate_raw(p + data_at, comp_size, uncomp_size, name);
            } else {
                throw ZipError("unsupported compression method " +
                               std::to_string(method) + " for " + name);
            }
            std::uint32_t actual =
                crc32(0, reinterpret_cast<const unsigned char*>(entry.content.data()),
                      static_cast<uInt>(entry.content.size()));
            if (actual != crc) throw ZipError("CRC mismatch for " + name);
        }
        entries.push_back(std::move(entry));
        pos += 46 + name_len + extra_len + comment_len;
    }
    return entries;
}

void write_zip(const std::string& path, const std::vector<ZipEntry>& entries,
               bool compress) {
    std::string out;
    struct CdEntry {
        std::string name;
        std::uint32_t crc, comp_size, uncomp_size, offset;
        std::uint16_t method;
    };
    std::vector<CdEntry> cd;

    for (const auto& entry : entries) {
        check_entry_name(entry.name);
        std::uint32_t crc =
            crc32(0, reinterpret_cast<const unsigned char*>(entry.content.data()),
                  static_cast<uInt>(entry.content.size()));
        std::string data = entry.content;
        std::uint16_t method = 0;
        if (compress && !entry.is_dir && !entry.content.empty()) {
            std::string deflated(compressBound(static_cast<uLong>(entry.content.size())),
                                 '\0');
            z_stream zs;
            std::memset(&zs, 0, sizeof(zs));
            deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -MAX_WBITS, 8,
                         Z_DEFAULT_STRATEGY);
            zs.next_in = reinterpret_cast<unsigned char*>(
                const_cast<char*>(entry.content.data()));
            zs.avail_in = static_cast<uInt>(entry.content.size());
            zs.next_out = reinterpret_cast<unsigned char*>(deflated.data());
            zs.avail_out = static_cast<uInt>(deflated.size());
            deflate(&zs, Z_FINISH);
            deflated.resize(zs.total_out);
            deflateEnd(&zs);
            data = std::move(deflated);
            method = 8;
        }

        CdEntry c;
        c.name = entry.name;
        c.crc = crc;
        c.comp_size = static_cast<std::uint32_t>(data.size());
        c.uncomp_size = static_cast<std::uint32_t>(entry.content.size());
        c.offset = static_cast<std::uint32_t>(out.size());
        c.method = method;
        cd.push_back(c);

        wr32(out, kLocalSig);
        wr16(out, 20);      // version needed
        wr16(out, 0);       // flags
        wr16(out, method);
        wr16(out, 0);       // mod time
        wr16(out, 0);       // mod date
        wr32(out, crc);
        wr32(out, c.comp_size);
        wr32(out, c.uncomp_size);
        wr16(out, static_cast<std::uint16_t>(entry.name.size()));
        wr16(out, 0);       // extra len
        out += entry.name;
        out += data;
    }

    std::uint32_t cd_offset = static_cast<std::uint32_t>(out.size());
    for (const auto& c : cd) {
        wr32(out, kCentralSig);
        wr16(out, 20);      // version made by
        wr16(out, 20);      // version needed
        wr16(out, 0);       // flags
        wr16(out, c.method);
        wr16(out, 0);       // mod time
        wr16(out, 0);       // mod date
        wr32(out, c.crc);
        wr32(out, c.comp_size);
        wr32(out, c.uncomp_size);
        wr16(out, static_cast<std::uint16_t>(c.name.size()));
        wr16(out, 0);       // extra
        wr16(out, 0);       // comment
        wr16(out, 0);       // disk
        wr16(out, 0);       // internal attrs
        wr32(out, 0);       // external attrs
        wr32(out, c.offset);
        out += c.name;
    }
    std::uint32_t cd_size = static_cast<std::uint32_t>(out.size()) - cd_offset;

    wr32(out, kEndSig);
    wr16(out, 0); // disk
    wr16(out, 0); // cd disk
    wr16(out, static_cast<std::uint16_t>(cd.size()));
    wr16(out, static_cast<std::uint16_t>(cd.size()));
    wr32(out, cd_size);
    wr32(out, cd_offset);
    wr16(out, 0); // comment len

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw ZipError("cannot write archive: " + path);
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
}

} // namespace kga
