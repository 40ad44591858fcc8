//*****************************************************************************
// Copyright 2026 The ALEX Authors
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
//*****************************************************************************
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace alex {

enum class ErrorKind {
    // usage / configuration
    BadRatios,
    ConfigError,
    InvalidTask,
    PolicyMismatch,
    EmptyGrid,
    PerplexityTooLarge,
    // data
    MalformedRecord,
    UnknownLabel,
    DuplicateId,
    UnlabeledDataset,
    EmptyText,
    EmptyClass,
    EmptyDataset,
    InsufficientAugmentation,
    LengthMismatch,
    DimensionMismatch,
    IdMismatch,
    PendingDecisions,
    AlreadyDecided,
    UnknownItem,
    InvalidDistribution,
    LabelOutOfTask,
    DivergedLoss,
    IoError,
    // backend
    BackendFailure,
    ClientFailure,
};

enum class ErrorCategory { Usage = 1, Data = 2, Backend = 3 };

constexpr std::string_view to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::BadRatios: return "BadRatios";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::InvalidTask: return "InvalidTask";
    case ErrorKind::PolicyMismatch: return "PolicyMismatch";
    case ErrorKind::EmptyGrid: return "EmptyGrid";
    case ErrorKind::PerplexityTooLarge: return "PerplexityTooLarge";
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::UnlabeledDataset: return "UnlabeledDataset";
    case ErrorKind::EmptyText: return "EmptyText";
    case ErrorKind::EmptyClass: return "EmptyClass";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::InsufficientAugmentation: return "InsufficientAugmentation";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::IdMismatch: return "IdMismatch";
    case ErrorKind::PendingDecisions: return "PendingDecisions";
    case ErrorKind::AlreadyDecided: return "AlreadyDecided";
    case ErrorKind::UnknownItem: return "UnknownItem";
    case ErrorKind::InvalidDistribution: return "InvalidDistribution";
    case ErrorKind::LabelOutOfTask: return "LabelOutOfTask";
    case ErrorKind::DivergedLoss: return "DivergedLoss";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::BackendFailure: return "BackendFailure";
    case ErrorKind::ClientFailure: return "ClientFailure";
    }
    return "Unknown";
}

constexpr ErrorCategory category_of(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::BadRatios:
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidTask:
    case ErrorKind::PolicyMismatch:
    case ErrorKind::EmptyGrid:
    case ErrorKind::PerplexityTooLarge:
        return ErrorCategory::Usage;
    case ErrorKind::BackendFailure:
    case ErrorKind::ClientFailure:
        return ErrorCategory::Backend;
    default:
        return ErrorCategory::Data;
    }
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind)
    {
    }

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
    [[nodiscard]] ErrorCategory category() const noexcept { return category_of(kind_); }
    [[nodiscard]] int exit_code() const noexcept { return static_cast<int>(category()); }

private:
    ErrorKind kind_;
};

} // namespace alex
