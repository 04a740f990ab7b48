// Copyright 2026 The CRM Audit Authors
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

#include <stdexcept>
#include <string>

namespace crm {

// Every error raised by the toolkit derives from Error; the CLI maps the
// three families (config, adapter, data) onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class AdapterError : public Error {
 public:
  using Error::Error;
};

// Backend reported a failure for a well-formed request.
class ModelError : public AdapterError {
 public:
  using AdapterError::AdapterError;
};

class MissingCountryCodes : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class SchemaError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class WindowUnsatisfiable : public DataError {
 public:
  using DataError::DataError;
};

class MissingField : public DataError {
 public:
  using DataError::DataError;
};

class EmptyTarget : public DataError {
 public:
  using DataError::DataError;
};

class MalformedEmail : public DataError {
 public:
  using DataError::DataError;
};

class EmptyPool : public DataError {
 public:
  using DataError::DataError;
};

class MissingStats : public DataError {
 public:
  using DataError::DataError;
};

class MissingFrequencyTable : public DataError {
 public:
  using DataError::DataError;
};

class EmptyClass : public DataError {
 public:
  using DataError::DataError;
};

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace crm
