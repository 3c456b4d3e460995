#ifndef CRASHML_TESTS_FROZEN_GRIDS_HPP
#define CRASHML_TESTS_FROZEN_GRIDS_HPP

// Reference values frozen from 50-digit evaluations (regularized upper
// incomplete gamma; quadrature of the k-normal range distribution).

namespace crashml::testing {

struct Chi2Point {
  double x;
  double df;
  double sf;
};

inline constexpr Chi2Point kChi2Grid[] = {
    {0.001, 1.0, 0.97477287936996039},  {0.02, 1.0, 0.88753708398171511},
    {0.6, 1.0, 0.43857802608099986},    {1.0, 1.0, 0.3173105078629141},
    {3.84, 1.0, 0.050043521248705103},  {10.0, 1.0, 0.0015654022580025497},
    {0.01, 2.0, 0.99501247919268231},   {0.5, 2.0, 0.77880078307140487},
    {1.0, 2.0, 0.60653065971263342},    {5.99, 2.0, 0.050036627086586283},
    {20.0, 2.0, 4.5399929762484852e-5}, {50.0, 2.0, 1.3887943864964021e-11},
    {0.1, 3.0, 0.99183742373187648},    {1.0, 3.0, 0.8012519569012008},
    {2.37, 3.0, 0.49924354320608189},   {7.81, 3.0, 0.050106056350005941},
    {30.0, 3.0, 1.3800570312932547e-6}, {786.9, 3.0, 3.0011436720164842e-170},
    {0.5, 4.0, 0.97350097883925609},    {2.0, 4.0, 0.73575888234288464},
    {9.49, 4.0, 0.049953131223294893},  {40.0, 4.0, 4.3284226071209714e-8},
    {0.05, 4.0, 0.99969265982904099},   {0.25, 5.0, 0.99847918144663156},
    {1.15, 5.0, 0.9495832980185947},    {4.35, 5.0, 0.50020012100779297},
    {11.07, 5.0, 0.050009618622405482}, {60.0, 5.0, 1.2154569777183039e-11},
    {0.7, 6.0, 0.99449106661553434},    {5.35, 6.0, 0.49976830631616365},
    {12.59, 6.0, 0.050029011738915217}, {1.0, 7.0, 0.99482853651651548},
    {6.35, 7.0, 0.4995267889880812},    {14.07, 7.0, 0.049950250317479464},
    {80.0, 7.0, 1.377501829742615e-14}, {3.33, 9.0, 0.94976360061146947},
    {16.92, 9.0, 0.049983606387505641}, {2.0, 10.0, 0.99634015317265629},
    {9.34, 10.0, 0.50016880317346911},  {18.31, 10.0, 0.049954166343696703},
    {100.0, 10.0, 5.4497019829205293e-17}, {7.0, 15.0, 0.95764974733255119},
    {25.0, 15.0, 0.049943433626428367}, {5.0, 20.0, 0.99972264790537916},
    {19.34, 20.0, 0.4998346134279529},  {31.41, 20.0, 0.050005239202315168},
    {150.0, 20.0, 6.285681673933381e-22}, {16.0, 30.0, 0.98274300960203356},
    {43.77, 30.0, 0.050030830865544139}, {20.0, 50.0, 0.9999530506185732},
    {49.33, 50.0, 0.50019850116953712}, {67.5, 50.0, 0.050040651716103389},
    {300.0, 50.0, 2.3141364165140699e-37},
};

struct RangePoint {
  double q;
  int k;
  double sf;
};

inline constexpr RangePoint kRangeGrid[] = {
    {1.0, 2, 0.479500122186953},   {2.772, 2, 0.0499841035510558},
    {2.0, 3, 0.33349932504015},    {3.314, 3, 0.0500441404061102},
    {3.633, 4, 0.050014978995378}, {1.5, 4, 0.713508586792752},
    {4.03, 6, 0.0500091758360104}, {2.5, 5, 0.392542763241264},
};

// Crash rate at (count 10, length 1, lanes 2, aadt 5000, p 0.8), frozen from
// an extended-precision evaluation of the rate formula.
inline constexpr double kCrashRateReference = 56.255593183319260081;

}  // namespace crashml::testing

#endif  // CRASHML_TESTS_FROZEN_GRIDS_HPP
