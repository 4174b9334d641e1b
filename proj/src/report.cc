#include "delaystab/report.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "delaystab/error.h"

namespace delaystab {
namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 420;
constexpr double kLeft = 70;
constexpr double kRight = 20;
constexpr double kTop = 40;
constexpr double kBottom = 50;

std::string Num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// Plot frame mapping data coordinates onto the drawing area.
class Frame {
 public:
  Frame(double x0, double x1, double y0, double y1)
      : x0_(x0), x1_(x1 > x0 ? x1 : x0 + 1), y0_(y0), y1_(y1 > y0 ? y1 : y0 + 1) {}

  double X(double x) const {
    return kLeft + (x - x0_) / (x1_ - x0_) * (kWidth - kLeft - kRight);
  }
  double Y(double y) const {
    return kHeight - kBottom - (y - y0_) / (y1_ - y0_) * (kHeight - kTop - kBottom);
  }

  std::string Axes(const std::string& title, const std::string& xlabel,
                   const std::string& ylabel) const {
    std::ostringstream s;
    s << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\""
      << kWidth - kLeft - kRight << "\" height=\"" << kHeight - kTop - kBottom
      << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double x = x0_ + k * (x1_ - x0_) / 4;
      const double y = y0_ + k * (y1_ - y0_) / 4;
      s << "<text x=\"" << Num(X(x)) << "\" y=\"" << kHeight - kBottom + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">" << Num(x) << "</text>\n";
      s << "<text x=\"" << kLeft - 6 << "\" y=\"" << Num(Y(y) + 4)
        << "\" font-size=\"11\" text-anchor=\"end\">" << Num(y) << "</text>\n";
    }
    s << "<text x=\"" << kWidth / 2 << "\" y=\"22\" font-size=\"14\" "
      << "text-anchor=\"middle\">" << title << "</text>\n";
    s << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12
      << "\" font-size=\"12\" text-anchor=\"middle\">" << xlabel << "</text>\n";
    s << "<text x=\"16\" y=\"" << kHeight / 2 << "\" font-size=\"12\" "
      << "text-anchor=\"middle\" transform=\"rotate(-90 16 " << kHeight / 2
      << ")\">" << ylabel << "</text>\n";
    return s.str();
  }

 private:
  double x0_, x1_, y0_, y1_;
};

std::string Document(const std::string& body) {
  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
    << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
    << kHeight << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << body << "</svg>\n";
  return s.str();
}

}  // namespace

bool CsvTable::has(const std::string& name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

const std::vector<double>& CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw Error(ErrorClass::kSimulate, "CSV has no column '" + name + "'");
  }
  return columns[it - header.begin()];
}

CsvTable ReadCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorClass::kSimulate, "cannot read '" + path + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorClass::kSimulate, "empty CSV '" + path + "'");
  }
  std::string cell;
  std::istringstream head(line);
  while (std::getline(head, cell, ',')) t.header.push_back(cell);
  t.columns.resize(t.header.size());
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream cells(line);
    size_t k = 0;
    while (std::getline(cells, cell, ',')) {
      if (k >= t.header.size()) break;
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) {
        throw Error(ErrorClass::kSimulate,
                    path + ": bad number on row " + std::to_string(row));
      }
      t.columns[k++].push_back(v);
    }
    if (k != t.header.size()) {
      throw Error(ErrorClass::kSimulate,
                  path + ": short row " + std::to_string(row));
    }
  }
  return t;
}

std::string NormPlotSvg(const std::vector<double>& times,
                        const std::vector<double>& norms, double sigma) {
  std::vector<double> t, y;
  for (size_t i = 0; i < times.size() && i < norms.size(); ++i) {
    if (norms[i] > 0 && std::isfinite(norms[i])) {
      t.push_back(times[i]);
      y.push_back(std::log10(norms[i]));
    }
  }
  if (t.empty()) return Document("<text x=\"20\" y=\"40\">no positive norms</text>\n");
  const double ref0 = y.front();
  const double slope = -sigma / std::log(10.0);
  double lo = *std::min_element(y.begin(), y.end());
  double hi = *std::max_element(y.begin(), y.end());
  lo = std::min(lo, ref0 + slope * t.back());
  hi = std::max(hi, ref0);
  const Frame f(t.front(), t.back(), std::floor(lo), std::ceil(hi));

  std::ostringstream body;
  body << f.Axes("state norm", "t", "log10 |z(t)|");
  // Thin the polyline to about 2000 vertices.
  const size_t every = std::max<size_t>(1, t.size() / 2000);
  body << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (size_t i = 0; i < t.size(); i += every) {
    body << Num(f.X(t[i])) << "," << Num(f.Y(y[i])) << " ";
  }
  body << Num(f.X(t.back())) << "," << Num(f.Y(y.back())) << "\"/>\n";
  body << "<line x1=\"" << Num(f.X(t.front())) << "\" y1=\"" << Num(f.Y(ref0))
       << "\" x2=\"" << Num(f.X(t.back())) << "\" y2=\""
       << Num(f.Y(ref0 + slope * (t.back() - t.front())))
       << "\" stroke=\"#d62728\" stroke-dasharray=\"6,4\"/>\n";
  body << "<text x=\"" << kWidth - kRight - 4 << "\" y=\"" << kTop + 16
       << "\" font-size=\"11\" text-anchor=\"end\" fill=\"#d62728\">rate "
       << Num(sigma) << " reference</text>\n";
  return Document(body.str());
}

std::string EigenvalueSvg(const std::vector<std::complex<double>>& eigenvalues,
                          double sigma) {
  double re_max = -sigma;
  double im_max = 1.0;
  for (const auto& l : eigenvalues) {
    re_max = std::max(re_max, l.real());
    im_max = std::max(im_max, std::abs(l.imag()));
  }
  // Deep stable eigenvalues of fine grids would flatten the picture.
  const double span = std::max(1.0, re_max + sigma);
  const double x0 = -sigma - 4 * span;
  const double x1 = re_max + 0.5 * span;
  const Frame f(x0, x1, -1.2 * im_max, 1.2 * im_max);
  std::ostringstream body;
  body << f.Axes("spectrum", "Re", "Im");
  body << "<line x1=\"" << Num(f.X(-sigma)) << "\" y1=\"" << kTop << "\" x2=\""
       << Num(f.X(-sigma)) << "\" y2=\"" << kHeight - kBottom
       << "\" stroke=\"#d62728\" stroke-dasharray=\"6,4\"/>\n";
  int hidden = 0;
  for (const auto& l : eigenvalues) {
    if (l.real() < x0) {
      ++hidden;
      continue;
    }
    const char* color = l.real() >= -sigma ? "#d62728" : "#1f77b4";
    body << "<circle cx=\"" << Num(f.X(l.real())) << "\" cy=\""
         << Num(f.Y(l.imag())) << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";
  }
  if (hidden > 0) {
    body << "<text x=\"" << kLeft + 6 << "\" y=\"" << kTop + 16
         << "\" font-size=\"11\">" << hidden << " eigenvalues left of "
         << Num(x0) << "</text>\n";
  }
  return Document(body.str());
}

std::string KernelSvg(const KernelDump& dump) {
  const int n = dump.steps;
  const int cells = std::min(n + 1, 120);
  std::vector<double> grid(static_cast<size_t>(cells) * cells, -1.0);
  double top = 0.0;
  for (int a = 0; a < cells; ++a) {
    const int i = static_cast<int>(std::lround(static_cast<double>(a) * n / std::max(1, cells - 1)));
    for (int b = 0; b <= a; ++b) {
      const int j = static_cast<int>(std::lround(static_cast<double>(b) * n / std::max(1, cells - 1)));
      const double v = dump.Norm(i, std::min(i, j));
      grid[a * cells + b] = v;
      top = std::max(top, v);
    }
  }
  const Frame f(0.0, dump.horizon, 0.0, dump.horizon);
  std::ostringstream body;
  body << f.Axes("memory kernel |K(t,s)|", "s", "t");
  const double w = (kWidth - kLeft - kRight) / cells;
  const double h = (kHeight - kTop - kBottom) / cells;
  for (int a = 0; a < cells; ++a) {
    for (int b = 0; b <= a; ++b) {
      const double v = top > 0 ? grid[a * cells + b] / top : 0.0;
      const int shade = static_cast<int>(std::lround(255 * (1.0 - v)));
      body << "<rect x=\"" << Num(kLeft + b * w) << "\" y=\""
           << Num(kHeight - kBottom - (a + 1) * h) << "\" width=\"" << Num(w + 0.3)
           << "\" height=\"" << Num(h + 0.3) << "\" fill=\"rgb(255," << shade
           << "," << shade << ")\"/>\n";
    }
  }
  body << "<text x=\"" << kWidth - kRight - 4 << "\" y=\"" << kTop + 16
       << "\" font-size=\"11\" text-anchor=\"end\">max " << Num(top) << "</text>\n";
  return Document(body.str());
}

}  // namespace delaystab
