// Copyright 2026 The plausi Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace plausi {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Input geometry that admits no meaningful result (zero quaternion, collinear points).
class DegenerateInputError : public Error
{
public:
    using Error::Error;
};

/// Invalid parameters, mismatched shapes, empty regions.
class ConfigError : public Error
{
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error
{
public:
    using Error::Error;
};

/// Caller broke a documented precondition.
class PreconditionError : public Error
{
public:
    using Error::Error;
};

/// Point lies on or behind the camera plane.
class BehindCameraError : public Error
{
public:
    using Error::Error;
};

/// RANSAC found too few ground inliers.
class NoGroundError : public Error
{
public:
    using Error::Error;
};

/// Synthetic scene sampling gave up.
class GenerationError : public Error
{
public:
    using Error::Error;
};

/// Malformed or missing file content.
class DataError : public Error
{
public:
    using Error::Error;
};

/// Objective returned a non-finite value.
class EvaluationError : public Error
{
public:
    EvaluationError(const std::string& what, std::ptrdiff_t coordinate = -1)
        : Error(what), coordinate_(coordinate)
    {
    }

    /// Index of the probed coordinate, or -1 when the base point itself failed.
    std::ptrdiff_t coordinate() const noexcept { return coordinate_; }

private:
    std::ptrdiff_t coordinate_;
};

} // namespace plausi
