package com.piggymetrics.auth.service;

import org.springframework.security.crypto.bcrypt.BCryptPasswordEncoder;

public class UserServiceImpl {

    private static final BCryptPasswordEncoder encoder = new BCryptPasswordEncoder();

    public String create(User user) {
        String hash = encoder.encode(user.getPwd());
        return hash;
    }
}
